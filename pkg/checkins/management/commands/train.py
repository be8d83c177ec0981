from checkins.management.base import PipelineCommand


class Command(PipelineCommand):
    help = 'Train the multi-channel convolutional model on the train split'
    stages = ('train',)

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--epochs', type=int)
        parser.add_argument('--learning-rate', dest='learning_rate', type=float)

    def overrides(self, options):
        values = super().overrides(options)
        values.update(epochs=options.get('epochs'), learning_rate=options.get('learning_rate'))
        return values
