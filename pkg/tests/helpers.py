from asyncsc.chain import CrossTx, CrossTxSet


def make_tx(i: int, epoch: int = 0, ts: float | None = None, weight: int = 1, deps=(), payload=b"d") -> CrossTx:
    tid = i.to_bytes(16, "big")
    return CrossTx(tid, epoch, "send", "MC", "SC", payload, float(i if ts is None else ts), weight, tuple(deps))


def make_set(ids, epoch: int = 0) -> CrossTxSet:
    return CrossTxSet(epoch, tuple(make_tx(i, epoch) for i in ids))


# criterion number -> (passed, detail); printed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(passed), detail)
    print(f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})")
