"""Error types raised by the check-in pipeline.

Everything derives from PipelineError so management commands can turn any
domain failure into a CommandError with one except clause.
"""


class PipelineError(Exception):
    pass


# ingestion

class LineError(PipelineError):
    """A problem tied to one input line (and usually one field)."""

    def __init__(self, line_number, field, detail):
        self.line_number = line_number
        self.field = field
        self.detail = detail
        where = f'line {line_number}'
        if field:
            where += f', field {field}'
        super().__init__(f'{where}: {detail}')


class MalformedLine(LineError):
    pass


class InvalidCoordinate(LineError):
    pass


class InvalidDate(LineError):
    pass


class UnknownCategory(PipelineError):
    def __init__(self, category_id, line_number=None):
        self.category_id = category_id
        self.line_number = line_number
        where = f'line {line_number}: ' if line_number is not None else ''
        super().__init__(f'{where}unknown category id {category_id!r}')


class DatasetIOError(PipelineError):
    pass


class NoData(PipelineError):
    pass


# influence analysis

class EmptySample(PipelineError):
    pass


class ZeroEntropy(PipelineError):
    pass


class EmptyDataset(PipelineError):
    pass


# features / applicability

class MissingHome(PipelineError):
    pass


class MissingRecord(PipelineError):
    pass


# unified model

class InvalidConfig(PipelineError):
    pass


class ShapeMismatch(PipelineError):
    pass


class EmptyBatch(PipelineError):
    pass


class Divergence(PipelineError):
    def __init__(self, epoch, step, loss):
        self.epoch = epoch
        self.step = step
        self.loss = loss
        super().__init__(f'training diverged at epoch {epoch}, step {step} (loss={loss})')


class BadK(PipelineError):
    pass


# evaluation

class LengthMismatch(PipelineError):
    pass


class InvalidSpec(PipelineError):
    pass


# orchestration

class ConfigError(PipelineError):
    def __init__(self, errors):
        self.errors = errors
        if isinstance(errors, dict):
            detail = '; '.join(f'{key}: {", ".join(map(str, msgs))}' for key, msgs in errors.items())
        else:
            detail = str(errors)
        super().__init__(f'invalid configuration: {detail}')


class MissingArtifact(PipelineError):
    def __init__(self, stage, requirement, path):
        self.stage = stage
        self.requirement = requirement
        self.path = path
        super().__init__(f'stage {stage!r} needs {requirement!r} output, missing {path}')


class StageError(PipelineError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f'stage {stage!r} failed: {cause}')
