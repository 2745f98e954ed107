"""codemix URL Configuration

Only the admin is routed; it lists ExperimentRun records written by the
``experiment`` management command.
"""
from django.contrib import admin
from django.urls import path


urlpatterns = [
    path('admin/', admin.site.urls),
]
