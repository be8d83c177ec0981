# Generated by Django 5.2.6 on 2025-10-02 09:41

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='Dataset',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=100, unique=True)),
                ('source_path', models.CharField(max_length=500)),
                ('content_hash', models.CharField(max_length=64)),
                ('users', models.PositiveIntegerField(default=0)),
                ('pois', models.PositiveIntegerField(default=0)),
                ('checkins', models.PositiveIntegerField(default=0)),
                ('skipped_lines', models.PositiveIntegerField(default=0)),
                ('unknown_records', models.PositiveIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'db_table': 'checkins_dataset',
                'ordering': ['name'],
            },
        ),
        migrations.CreateModel(
            name='CheckInRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('user_id', models.CharField(max_length=64)),
                ('poi_id', models.CharField(max_length=64)),
                ('category_id', models.CharField(max_length=64)),
                ('category_name', models.CharField(max_length=200)),
                ('root_category', models.CharField(max_length=100)),
                ('latitude', models.FloatField()),
                ('longitude', models.FloatField()),
                ('checked_at', models.DateTimeField()),
                ('line_number', models.PositiveIntegerField()),
                ('dataset', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='records', to='checkins.dataset')),
            ],
            options={
                'db_table': 'checkins_record',
                'ordering': ['dataset', 'user_id', 'checked_at', 'line_number'],
                'indexes': [
                    models.Index(fields=['dataset', 'user_id'], name='checkins_re_dataset_user_idx'),
                    models.Index(fields=['dataset', 'checked_at'], name='checkins_re_dataset_time_idx'),
                    models.Index(fields=['root_category'], name='checkins_re_root_idx'),
                ],
            },
        ),
        migrations.CreateModel(
            name='UserHome',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('user_id', models.CharField(max_length=64)),
                ('latitude', models.FloatField()),
                ('longitude', models.FloatField()),
                ('support_count', models.PositiveIntegerField()),
                ('dataset', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='homes', to='checkins.dataset')),
            ],
            options={
                'db_table': 'checkins_user_home',
                'ordering': ['dataset', 'user_id'],
                'constraints': [
                    models.UniqueConstraint(fields=('dataset', 'user_id'), name='checkins_home_unique_user'),
                ],
            },
        ),
        migrations.CreateModel(
            name='StageRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('stage', models.CharField(choices=[('ingest', 'Ingest'), ('influence', 'Influence analysis'), ('features', 'Feature matrices'), ('applicability', 'Applicability analysis'), ('train', 'Unified model training'), ('evaluate', 'Evaluation')], max_length=20)),
                ('status', models.CharField(choices=[('succeeded', 'Succeeded'), ('failed', 'Failed')], max_length=10)),
                ('out_dir', models.CharField(max_length=500)),
                ('config_hash', models.CharField(max_length=64)),
                ('seed', models.IntegerField()),
                ('manifest_path', models.CharField(blank=True, max_length=500)),
                ('message', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('dataset', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='runs', to='checkins.dataset')),
            ],
            options={
                'db_table': 'checkins_stage_run',
                'ordering': ['-created_at'],
                'indexes': [
                    models.Index(fields=['stage', 'status'], name='checkins_st_stage_status_idx'),
                ],
            },
        ),
    ]
