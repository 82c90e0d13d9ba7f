"""Exception hierarchy.

``InputError`` covers bad files and bad parameters; ``AnalysisError`` covers
failures of the numerical pipeline on otherwise valid input. The CLI maps the
two families to distinct exit codes.
"""


class StratcalError(Exception):
    pass


class InputError(StratcalError):
    pass


class SchemaError(InputError):
    pass


class DatasetError(InputError):
    pass


class SpecError(InputError):
    pass


class AnalysisError(StratcalError):
    pass


class PartitionError(AnalysisError):
    pass


class StatisticsError(AnalysisError):
    pass


class MetricError(AnalysisError):
    def __init__(self, message, bin_index=None):
        super().__init__(message)
        self.bin_index = bin_index


class FitError(AnalysisError):
    pass
