"""Gas accounting and the Ether/USD cost calculator.

Gas is a flat per-function constant measured on the reference deployment;
the three view functions run locally against a replica and always cost
zero.  Arithmetic is exact (``decimal.Decimal``): ether = gas * gas_price
and usd = ether * ether_price, with rounding applied only when formatting
(ether to two significant figures, USD to cents).

Failed transactions are charged their full function gas, like production
chains do.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .contract import Function, TRANSACTION_FUNCTIONS, VIEW_FUNCTIONS

DEFAULT_GAS_PRICE = Decimal("3.0E-9")  # Ether per gas unit
DEFAULT_ETHER_PRICE = Decimal("219.01")  # USD per Ether

_MEASURED_GAS = {
    Function.ADD_MANAGER.value: 66632,
    Function.DELETE_MANAGER.value: 17677,
    Function.ADD_USER_ACCOUNT.value: 94562,
    Function.DELETE_USER_ACCOUNT.value: 65020,
    Function.ADD_ATTRIBUTE.value: 182045,
    Function.DELETE_ATTRIBUTE.value: 33017,
    Function.PERMIT_ATTRIBUTE_MANAGER.value: 45151,
    Function.DENY_ATTRIBUTE_MANAGER.value: 15283,
}


class UnknownFunctionError(ValueError):
    pass


@dataclass(frozen=True)
class GasSchedule:
    """Gas units per transaction function; must cover exactly the eight."""

    gas: dict[str, int]

    def __post_init__(self):
        if set(self.gas) != TRANSACTION_FUNCTIONS:
            missing = TRANSACTION_FUNCTIONS - set(self.gas)
            extra = set(self.gas) - TRANSACTION_FUNCTIONS
            raise ValueError(f"schedule must cover the transaction functions exactly "
                             f"(missing={sorted(missing)}, extra={sorted(extra)})")

    def __getitem__(self, function: str) -> int:
        if function in VIEW_FUNCTIONS:
            return 0
        try:
            return self.gas[function]
        except KeyError:
            raise UnknownFunctionError(f"unknown function: {function!r}") from None


def default_schedule() -> GasSchedule:
    return GasSchedule(dict(_MEASURED_GAS))


@dataclass(frozen=True)
class CostReport:
    function: str
    gas: int
    ether: Decimal
    usd: Decimal
    gas_price: Decimal
    ether_price: Decimal


def cost_report(
    function: str,
    schedule: GasSchedule | None = None,
    gas_price: Decimal = DEFAULT_GAS_PRICE,
    ether_price: Decimal = DEFAULT_ETHER_PRICE,
) -> CostReport:
    """Exact cost of one transaction or view call."""
    if gas_price <= 0 or ether_price <= 0:
        raise ValueError("gas_price and ether_price must be positive")
    schedule = schedule or default_schedule()
    gas = schedule[function]
    ether = gas * gas_price
    return CostReport(
        function=function,
        gas=gas,
        ether=ether,
        usd=ether * ether_price,
        gas_price=gas_price,
        ether_price=ether_price,
    )


@dataclass(frozen=True)
class AggregateCost:
    gas: int
    ether: Decimal
    usd: Decimal


@dataclass(frozen=True)
class ChainCostSummary:
    per_sender: dict[bytes, AggregateCost]
    total: AggregateCost


def chain_cost_summary(
    chain,
    schedule: GasSchedule | None = None,
    gas_price: Decimal = DEFAULT_GAS_PRICE,
    ether_price: Decimal = DEFAULT_ETHER_PRICE,
) -> ChainCostSummary:
    """Sum gas over every sealed transaction (failed ones included), by sender."""
    schedule = schedule or default_schedule()
    gas_by_sender: dict[bytes, int] = {}
    for tx in chain.iter_transactions():
        gas_by_sender[tx.sender] = gas_by_sender.get(tx.sender, 0) + schedule[tx.function]

    def aggregate(gas: int) -> AggregateCost:
        ether = gas * gas_price
        return AggregateCost(gas=gas, ether=ether, usd=ether * ether_price)

    return ChainCostSummary(
        per_sender={sender: aggregate(gas) for sender, gas in gas_by_sender.items()},
        total=aggregate(sum(gas_by_sender.values())),
    )


# --- display formatting --------------------------------------------------------


def round_significant(value: Decimal, figures: int = 2) -> Decimal:
    """Round to the given number of significant figures (half-up)."""
    if value == 0:
        return Decimal(0)
    exponent = value.adjusted()  # position of the most significant digit
    quantum = Decimal(1).scaleb(exponent - figures + 1)
    return value.quantize(quantum, rounding=ROUND_HALF_UP)


def format_ether(value: Decimal) -> str:
    """Two significant figures in scientific notation, e.g. ``2.0E-4``."""
    if value == 0:
        return "0"
    rounded = round_significant(value, 2)
    exponent = rounded.adjusted()
    mantissa = rounded.scaleb(-exponent).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)
    return f"{mantissa}E{exponent}"


def format_usd(value: Decimal) -> str:
    return f"${value.quantize(Decimal('0.01'), rounding=ROUND_HALF_UP)}"
