from django.db import models

from .ingestion import CheckIn, HomeLocation


# one ingested check-in file, keyed by name so several datasets can share a database
class Dataset(models.Model):
    name = models.CharField(max_length=100, unique=True)
    source_path = models.CharField(max_length=500)
    content_hash = models.CharField(max_length=64)
    users = models.PositiveIntegerField(default=0)
    pois = models.PositiveIntegerField(default=0)
    checkins = models.PositiveIntegerField(default=0)
    skipped_lines = models.PositiveIntegerField(default=0)
    unknown_records = models.PositiveIntegerField(default=0)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        db_table = 'checkins_dataset'
        ordering = ['name']

    def __str__(self):
        return self.name


# a valid check-in with its root category attached, one row per input line kept
class CheckInRecord(models.Model):
    dataset = models.ForeignKey(Dataset, on_delete=models.CASCADE, related_name='records')
    user_id = models.CharField(max_length=64)
    poi_id = models.CharField(max_length=64)
    category_id = models.CharField(max_length=64)
    category_name = models.CharField(max_length=200)
    root_category = models.CharField(max_length=100)
    latitude = models.FloatField()
    longitude = models.FloatField()
    checked_at = models.DateTimeField()
    line_number = models.PositiveIntegerField()

    class Meta:
        db_table = 'checkins_record'
        indexes = [
            models.Index(fields=['dataset', 'user_id'], name='checkins_re_dataset_user_idx'),
            models.Index(fields=['dataset', 'checked_at'], name='checkins_re_dataset_time_idx'),
            models.Index(fields=['root_category'], name='checkins_re_root_idx'),
        ]
        ordering = ['dataset', 'user_id', 'checked_at', 'line_number']

    def __str__(self):
        return f'{self.user_id} @ {self.poi_id} ({self.checked_at:%Y-%m-%d %H:%M:%S})'

    @classmethod
    def from_checkin(cls, dataset, checkin: CheckIn) -> 'CheckInRecord':
        return cls(
            dataset=dataset,
            user_id=checkin.user_id,
            poi_id=checkin.poi_id,
            category_id=checkin.category_id,
            category_name=checkin.category_name,
            root_category=checkin.root_category or '',
            latitude=checkin.latitude,
            longitude=checkin.longitude,
            checked_at=checkin.timestamp,
            line_number=checkin.line_number,
        )

    def to_checkin(self) -> CheckIn:
        return CheckIn(
            user_id=self.user_id,
            poi_id=self.poi_id,
            category_id=self.category_id,
            category_name=self.category_name,
            latitude=self.latitude,
            longitude=self.longitude,
            timestamp=self.checked_at,
            root_category=self.root_category or None,
            line_number=self.line_number,
        )


# estimated home per user, computed from all of the user's records at ingest
class UserHome(models.Model):
    dataset = models.ForeignKey(Dataset, on_delete=models.CASCADE, related_name='homes')
    user_id = models.CharField(max_length=64)
    latitude = models.FloatField()
    longitude = models.FloatField()
    support_count = models.PositiveIntegerField()

    class Meta:
        db_table = 'checkins_user_home'
        constraints = [
            models.UniqueConstraint(fields=['dataset', 'user_id'], name='checkins_home_unique_user'),
        ]
        ordering = ['dataset', 'user_id']

    def __str__(self):
        return f'home of {self.user_id} ({self.latitude:.5f}, {self.longitude:.5f})'

    def to_home(self) -> HomeLocation:
        return HomeLocation(self.user_id, self.latitude, self.longitude, self.support_count)


# bookkeeping for every stage execution, points at the manifest it wrote
class StageRun(models.Model):
    STAGE_CHOICES = [
        ('ingest', 'Ingest'),
        ('influence', 'Influence analysis'),
        ('features', 'Feature matrices'),
        ('applicability', 'Applicability analysis'),
        ('train', 'Unified model training'),
        ('evaluate', 'Evaluation'),
    ]
    STATUS_CHOICES = [
        ('succeeded', 'Succeeded'),
        ('failed', 'Failed'),
    ]

    dataset = models.ForeignKey(Dataset, on_delete=models.SET_NULL, null=True, blank=True, related_name='runs')
    stage = models.CharField(max_length=20, choices=STAGE_CHOICES)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES)
    out_dir = models.CharField(max_length=500)
    config_hash = models.CharField(max_length=64)
    seed = models.IntegerField()
    manifest_path = models.CharField(max_length=500, blank=True)
    message = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = 'checkins_stage_run'
        indexes = [
            models.Index(fields=['stage', 'status'], name='checkins_st_stage_status_idx'),
        ]
        ordering = ['-created_at']

    def __str__(self):
        return f'{self.stage} ({self.status})'
