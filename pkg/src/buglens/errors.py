"""Exception hierarchy shared by every pipeline stage."""


class BugLensError(Exception):
    """Base class for all errors raised by buglens."""


class ValidationError(BugLensError):
    pass


# oracle / build layer


class OracleError(BugLensError):
    pass


class BuildFailure(OracleError):
    def __init__(self, commit, detail=""):
        super().__init__(f"could not build {commit}: {detail}".rstrip(": "))
        self.commit = commit
        self.detail = detail


class CommandTimeout(OracleError):
    def __init__(self, commit, seconds):
        super().__init__(f"command for {commit} exceeded {seconds}s")
        self.commit = commit
        self.seconds = seconds


class UnknownEntity(OracleError):
    pass


# bisection


class BisectError(BugLensError):
    pass


class NotFailingAtBad(BisectError):
    """The known-buggy version does not exhibit the failure."""


class NoGoodVersion(BisectError):
    """Every release marker before the buggy version fails or is undecidable."""


class IndeterminateBoundary(NoGoodVersion):
    """No passing marker was found and at least one marker was undecidable."""


class RangeError(BisectError):
    """The supplied bisection range does not bracket a PASS -> FAIL transition."""


class InconclusiveRegion(BisectError):
    def __init__(self, program_id, last_pass, first_fail, skipped):
        self.program_id = program_id
        self.last_pass = last_pass
        self.first_fail = first_fail
        self.skipped = list(skipped)
        super().__init__(
            f"{program_id}: first failure lies in {last_pass}..{first_fail} "
            f"but {len(self.skipped)} commit(s) in between are undecidable"
        )


class FlakyOracle(BisectError):
    def __init__(self, outcome, reason):
        super().__init__(f"{outcome.program_id}: {reason}")
        self.outcome = outcome
        self.reason = reason


# optimisation minimisation


class NotReproducibleAtCommit(BugLensError):
    pass


# ranking / evaluation


class DimensionMismatch(BugLensError):
    pass


class MissingLabel(BugLensError):
    def __init__(self, program_id):
        super().__init__(f"no ground-truth label for {program_id}")
        self.program_id = program_id


class DegenerateSample(BugLensError):
    pass


class InfeasibleParams(BugLensError):
    pass
