import django_filters

from .models import CheckInRecord


class CharInFilter(django_filters.BaseInFilter, django_filters.CharFilter):
    pass


# selects the check-ins a run works on: users and time window
class CheckInFilter(django_filters.FilterSet):
    user_id = CharInFilter(field_name='user_id', lookup_expr='in')
    checked_at__gte = django_filters.DateTimeFilter(field_name='checked_at', lookup_expr='gte')
    checked_at__lte = django_filters.DateTimeFilter(field_name='checked_at', lookup_expr='lte')

    class Meta:
        model = CheckInRecord
        fields = ['user_id', 'checked_at__gte', 'checked_at__lte']
