"""Static per-block cycle counts on the source pipeline model.

The pipeline is an in-order scoreboard: an instruction issues once it has
an issue slot and all of its source registers are ready.  A producer
issued at ``t`` with result latency ``L`` makes its destination ready at
``t + L``.  The :class:`Scoreboard` is shared with the reference simulator,
which steps it dynamically instead of over a whole block.
"""

from dataclasses import dataclass

FORWARD = "forward"
BACKWARD = "backward"
TAKEN = "taken"
NOT_TAKEN = "not_taken"


@dataclass(frozen=True)
class BlockTiming:
    block_id: int
    static_cycles: int
    branch_min: int = 0


class Scoreboard:
    """In-order issue model.

    ``occupancy`` is how long an instruction holds the issue stage; for
    single-cycle instructions up to ``width`` may share a cycle.
    """

    __slots__ = ("width", "ready", "next_t", "used", "end")

    def __init__(self, width=1):
        self.width = width
        self.ready = {}
        self.next_t = 0
        self.used = 0
        self.end = 0

    def issue(self, srcs, dst, occupancy, latency):
        t = self.next_t
        if self.used >= self.width:
            t += 1
        ready = self.ready
        for s in srcs:
            r = ready.get(s, 0)
            if r > t:
                t = r
        if t != self.next_t:
            self.used = 0
        if occupancy > 1:
            self.next_t = t + occupancy
            self.used = 0
        else:
            self.next_t = t
            self.used += 1
        if dst:
            ready[dst] = t + latency
        self.end = t + occupancy
        return t

    def stall(self, cycles):
        """Delay the next issue, e.g. for an instruction fetch miss."""
        if cycles:
            self.next_t = max(self.next_t + (1 if self.used >= self.width else 0), self.end) + cycles
            self.used = 0
            self.end = max(self.end, self.next_t)


def branch_direction(ins):
    return BACKWARD if ins.target <= ins.src_addr else FORWARD


def branch_cost(desc, direction, outcome, issue_cycles=None):
    """Cycles of a conditional branch under the static BTFNT predictor."""
    if issue_cycles is None:
        issue_cycles = _branch_issue(desc)
    predicted = TAKEN if direction == BACKWARD else NOT_TAKEN
    cost = issue_cycles
    if outcome == TAKEN:
        cost += desc.branch.taken_extra
    if predicted != outcome:
        cost += desc.branch.mispredict_penalty
    return cost


def _branch_issue(desc):
    for i in desc.instructions:
        if i.family == "branch":
            return desc.timing(i.timing_class).issue_cycles
    return 1


def branch_min(desc, direction, issue_cycles=None):
    return min(branch_cost(desc, direction, o, issue_cycles) for o in (TAKEN, NOT_TAKEN))


def branch_correction(desc, direction, outcome, issue_cycles=None):
    return branch_cost(desc, direction, outcome, issue_cycles) - branch_min(desc, direction, issue_cycles)


def static_cost(desc, ins):
    """Cycles an instruction holds the issue stage as billed statically.

    Conditional branches are billed their cheaper outcome; unconditional
    transfers are always taken and correctly predicted.
    """
    issue = desc.timing(ins.timing_class).issue_cycles
    if ins.op == "BRANCH":
        return branch_min(desc, branch_direction(ins), issue)
    if ins.op in ("JUMP", "CALL", "JUMP_REG"):
        return issue + desc.branch.taken_extra
    return issue


def issue_on(sb, desc, ins, cost=None):
    tc = desc.timing(ins.timing_class)
    return sb.issue(ins.srcs, ins.dst, tc.issue_cycles if cost is None else cost, tc.result_latency)


def scoreboard_cycles(block, desc) -> BlockTiming:
    sb = Scoreboard(desc.pipeline.issue_width)
    instrs = block.instrs
    for ins in instrs[:-1]:
        issue_on(sb, desc, ins)
    last = instrs[-1]
    cost = static_cost(desc, last)
    issue_on(sb, desc, last, cost)
    bmin = cost if last.op in ("BRANCH", "JUMP", "CALL", "JUMP_REG") else 0
    return BlockTiming(block.id, sb.end, bmin)


def instruction_cycles(ins, desc):
    """Standalone cost of one instruction with an empty pipeline."""
    return static_cost(desc, ins)


def dump_timing(timings) -> str:
    lines = ["block,static_cycles,branch_min"]
    lines += [f"{t.block_id},{t.static_cycles},{t.branch_min}" for t in timings]
    return "\n".join(lines) + "\n"
