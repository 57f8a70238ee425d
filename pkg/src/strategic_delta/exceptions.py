"""
Error hierarchy for strategic-delta.

Every error the package raises derives from :class:`StrategicDeltaError`.
Errors that mean "the caller asked for something malformed" derive from
:class:`UsageError` and make the CLI exit with status 2; everything else
exits with status 1.
"""


class StrategicDeltaError(Exception):
    """Base class for all package errors."""


class UsageError(StrategicDeltaError):
    """The request itself is malformed."""


# game_model
class InvalidParams(UsageError):
    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class OutOfRange(StrategicDeltaError):
    def __init__(self, value, space=None):
        self.value = value
        self.space = space
        msg = f"{value!r} is outside the action space"
        if space is not None:
            msg += f" {space}"
        super().__init__(msg)


class InvalidShape(UsageError):
    def __init__(self, shape):
        self.shape = shape
        super().__init__(f"Generated games must be between 2x2 and 10x10, got {shape}")


class WrongFamily(UsageError):
    def __init__(self, family, expected):
        self.family = family
        self.expected = expected
        super().__init__(f"Expected a {expected} game, got {family}")


# baselines
class Unsupported(StrategicDeltaError):
    def __init__(self, family, configuration=""):
        self.family = family
        self.configuration = configuration
        msg = f"Unsupported for {family}"
        if configuration:
            msg += f": {configuration}"
        super().__init__(msg)


class NoEquilibriumFound(StrategicDeltaError):
    """Support enumeration returned nothing; finite games always have one."""


class NoConvergence(StrategicDeltaError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"Fixed-point iteration stopped after {iterations} iterations "
            f"with residual {residual:.3e}"
        )


class InvalidRho(UsageError):
    def __init__(self, rho):
        self.rho = rho
        super().__init__(f"CRRA exponent must lie in (0, 1], got {rho}")


# residuals
class BaselineMissing(StrategicDeltaError):
    def __init__(self, game_id, role=None):
        self.game_id = game_id
        self.role = role
        super().__init__(f"No baseline for game {game_id!r} role {role}")


class BlockTooSmall(UsageError):
    def __init__(self, block_size, minimum):
        self.block_size = block_size
        super().__init__(f"Block size {block_size} is below the minimum {minimum}")


class DegeneratePool(StrategicDeltaError):
    def __init__(self, pool):
        self.pool = pool
        super().__init__(f"Pool {pool!r} has zero variance")


# signatures
class RankDeficient(StrategicDeltaError):
    def __init__(self, rank, columns):
        self.rank = rank
        self.columns = columns
        super().__init__(f"Design matrix has rank {rank} with {columns} columns")


class TooFewObservations(StrategicDeltaError):
    def __init__(self, n, required):
        self.n = n
        self.required = required
        super().__init__(f"{n} observations, at least {required} required")


class ZeroVariance(StrategicDeltaError):
    """All observations are identical."""


class SessionTooShort(StrategicDeltaError):
    def __init__(self, session_id, rounds, required):
        self.session_id = session_id
        self.rounds = rounds
        super().__init__(
            f"Session {session_id!r} has {rounds} rounds, at least {required} required"
        )


class InsufficientSessions(StrategicDeltaError):
    def __init__(self, n, required):
        self.n = n
        super().__init__(f"{n} sessions, at least {required} required")


class TooFewParaphrases(StrategicDeltaError):
    def __init__(self, n, required):
        self.n = n
        super().__init__(f"{n} paraphrase groups, at least {required} required")


class MeanNearZero(StrategicDeltaError):
    def __init__(self, mean):
        self.mean = mean
        super().__init__(
            f"Mean of group means is {mean:.3e}; coefficient of variation is undefined"
        )


class InsufficientLevels(StrategicDeltaError):
    def __init__(self, factor, levels, required):
        self.factor = factor
        self.levels = levels
        super().__init__(f"{factor} has {levels} levels, at least {required} required")


class IncompleteResults(UsageError):
    def __init__(self, missing):
        self.missing = missing
        super().__init__(f"Missing signature results: {', '.join(missing)}")


# moderator
class DegenerateVariance(StrategicDeltaError):
    """Pooled variance of both groups is zero."""


class TooFew(StrategicDeltaError):
    def __init__(self, n_a, n_b):
        super().__init__(f"Each group needs at least 2 values, got {n_a} and {n_b}")


class InvalidInputs(UsageError):
    pass


class MissingCondition(StrategicDeltaError):
    def __init__(self, game_id, condition):
        self.game_id = game_id
        self.condition = condition
        super().__init__(f"Game {game_id!r} has no {condition} observations")


class FewerThanThreeGames(StrategicDeltaError):
    def __init__(self, n):
        self.n = n
        super().__init__(f"The individuation gradient needs 3 games, got {n}")


# agents
class UnsupportedGameForKind(StrategicDeltaError):
    pass


class RoleMismatch(UsageError):
    def __init__(self, agents, roles):
        super().__init__(f"{agents} agent configs for a game with {roles} roles")


class EmptyDesign(UsageError):
    pass


# llm_adapter
class MissingSlot(UsageError):
    def __init__(self, slot):
        self.slot = slot
        super().__init__(f"Template slot {slot!r} has no value")


class NetworkError(StrategicDeltaError):
    pass


class ReplayMiss(StrategicDeltaError):
    def __init__(self, prompt_hash):
        self.prompt_hash = prompt_hash
        super().__init__(f"No stored transcript for prompt hash {prompt_hash}")


class AuthMissing(UsageError):
    def __init__(self, variable):
        self.variable = variable
        super().__init__(f"Environment variable {variable} is not set")


class Unparseable(StrategicDeltaError):
    def __init__(self, excerpt):
        self.excerpt = excerpt
        super().__init__(f"No decision found in response: {excerpt!r}")


# dataset / cli
class MissingColumn(StrategicDeltaError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"Required column {name!r} is missing")


class FieldTypeError(StrategicDeltaError):
    def __init__(self, line, column, value=None):
        self.line = line
        self.column = column
        self.value = value
        super().__init__(f"Line {line}: bad value {value!r} in column {column!r}")


class UnknownGame(StrategicDeltaError):
    def __init__(self, game_id):
        self.game_id = game_id
        super().__init__(f"Unknown game id {game_id!r}")


class ParseError(StrategicDeltaError):
    pass
