# Generated by Django 5.2.7 on 2026-10-18 09:12

import django.utils.timezone
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='RunManifest',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('command', models.CharField(choices=[('estimate', 'Estimate mean surface'), ('ci', 'Simultaneous confidence region'), ('test', 'Simultaneous mean test'), ('select-bandwidth', 'Bandwidth selection'), ('simulate', 'Simulate dataset'), ('study', 'Monte-Carlo study')], help_text='Command that produced the output', max_length=20)),
                ('config', models.JSONField(default=dict, help_text='Fully resolved configuration')),
                ('seeds', models.JSONField(blank=True, default=dict, help_text='Master seeds used by the run')),
                ('versions', models.JSONField(default=dict, help_text='Library versions')),
                ('wall_clock_seconds', models.FloatField(default=0.0, help_text='Elapsed time of the run in seconds')),
                ('input_checksums', models.JSONField(blank=True, default=dict, help_text='SHA-256 of every input file')),
                ('output_path', models.CharField(blank=True, help_text='Result file', max_length=500)),
                ('auto_bandwidth', models.BooleanField(default=False, help_text='Whether a bandwidth was selected from the data')),
                ('created_at', models.DateTimeField(default=django.utils.timezone.now)),
            ],
            options={
                'verbose_name': 'Run Manifest',
                'verbose_name_plural': 'Run Manifests',
                'db_table': 'run_manifests',
                'ordering': ['-created_at'],
                'indexes': [models.Index(fields=['command'], name='run_manifests_command_idx')],
            },
        ),
    ]
