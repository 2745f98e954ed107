from django.db import models
import uuid


class ExperimentRun(models.Model):
    """One invocation of the experiment command and where it wrote its outputs"""
    STATUS_CHOICES = [
        ('running', 'Running'),
        ('succeeded', 'Succeeded'),
        ('invalid', 'Invalid input'),
        ('failed', 'Failed'),
    ]

    run_id = models.UUIDField(default=uuid.uuid4, editable=False, unique=True)
    verb = models.CharField(max_length=32)
    argv = models.JSONField(default=list)
    manifest = models.JSONField(default=dict, blank=True)
    output_dir = models.CharField(max_length=500, blank=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default='running')
    error = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        ordering = ['-updated_at']

    def __str__(self):
        return f"{self.verb} {self.run_id} - {self.status}"

    def finish(self, status, error=''):
        self.status = status
        self.error = error
        self.save(update_fields=['status', 'error', 'manifest', 'updated_at'])
