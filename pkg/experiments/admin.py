from django.contrib import admin
from .models import ExperimentRun

@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ['run_id', 'verb', 'status', 'output_dir', 'created_at', 'updated_at']
    list_filter = ['verb', 'status', 'created_at']
    search_fields = ['run_id', 'verb', 'output_dir']
    readonly_fields = ['run_id', 'argv', 'manifest', 'created_at', 'updated_at']
