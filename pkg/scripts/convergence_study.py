"""Step-halving study for semispray integration on the separable fixture.

Prints endpoint error against the closed form x0 + log(1+t), 1/(1+t) and the
admissibility defect for a ladder of step counts, with successive ratios.
"""
import argparse
import math
from dataclasses import dataclass

from algebroids.semispray import admissibility_defect, integrate_semispray
from algebroids.specfile import load_spec


@dataclass
class Config:
    spec: str = "separable.json"
    x0: float = 0.0
    t1: float = 1.0
    steps: tuple = (125, 250, 500, 1000, 2000, 4000)


def run(cfg: Config):
    spec = load_spec(cfg.spec)
    rows = []
    for n in cfg.steps:
        c = integrate_semispray(spec.semispray, [cfg.x0, 1.0], (0.0, cfg.t1), n)
        err = max(abs(c.x[-1, 0] - cfg.x0 - math.log1p(cfg.t1)), abs(c.w[-1, 0] - 1 / (1 + cfg.t1)))
        rows.append((n, err, admissibility_defect(spec.bundle, c).value))
    return rows


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--spec", default=Config.spec)
    p.add_argument("--t1", type=float, default=Config.t1)
    args = p.parse_args()
    rows = run(Config(spec=args.spec, t1=args.t1))
    print(f"{'steps':>6} {'endpoint_err':>13} {'ratio':>7} {'admissibility':>14} {'ratio':>7}")
    prev = None
    for n, err, adm in rows:
        r1 = f"{prev[0] / err:7.2f}" if prev and err > 0 else "      -"
        r2 = f"{prev[1] / adm:7.2f}" if prev else "      -"
        print(f"{n:6d} {err:13.3e} {r1} {adm:14.3e} {r2}")
        prev = (err, adm)


if __name__ == "__main__":
    main()
