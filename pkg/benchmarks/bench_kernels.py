"""Time the python and cython kernel backends on the same synthetic inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--persons 6]

Each kernel is checked for identical output across backends before timing.
"""
import argparse
import time

import numpy as np

from paflc import default_skeleton
from paflc._kernels import available_backends, find_local_peaks, gaussian_maps, limb_scores, paf_accumulate
from paflc.labelgen import LabelGenConfig, generate_labels
from paflc.synthetic import gen_scene


def build_inputs(n_persons, seed):
    sk = default_skeleton()
    rng = np.random.default_rng(seed)
    scene = gen_scene(rng, n_persons, (1024, 1024), sk, min_gap=None)
    cfg = LabelGenConfig.for_image(1024, 1024)
    g = cfg.grid
    parts, centers, limb_ids, segs = [], [], [], []
    for p in scene.persons:
        for j in range(sk.num_parts):
            parts.append(j)
            centers.append(g.to_grid(*p.xy[j]))
        for c, (a, b) in enumerate(sk.limbs):
            limb_ids.append(c)
            segs.append(np.r_[g.to_grid(*p.xy[a]), g.to_grid(*p.xy[b])])
    labels = generate_labels(scene.persons, (), sk, cfg)
    peaks = np.asarray([p.xy[0] for p in scene.persons]) / g.stride - 0.5
    tails = np.asarray([p.xy[1] for p in scene.persons]) / g.stride - 0.5
    return dict(sk=sk, cfg=cfg, parts=np.array(parts), centers=np.array(centers),
                limb_ids=np.array(limb_ids), segs=np.array(segs), labels=labels, a=peaks, b=tails)


def cases(inp):
    sk, cfg = inp["sk"], inp["cfg"]
    h, w = cfg.grid.shape

    def maps(backend):
        out = np.zeros((sk.num_parts, h, w), np.float32)
        gaussian_maps(out, inp["parts"], inp["centers"], cfg.sigma, backend=backend)
        return out

    def pafs(backend):
        sums = np.zeros((sk.num_limbs, 2, h, w))
        counts = np.zeros((sk.num_limbs, h, w), np.int32)
        paf_accumulate(sums, counts, inp["limb_ids"], inp["segs"], cfg.limb_width, backend=backend)
        return sums, counts

    def peaks(backend):
        return [find_local_peaks(m, 0.1, backend=backend) for m in inp["labels"].maps]

    def scores(backend):
        paf = inp["labels"].pafs[0].astype(np.float64)
        a = np.repeat(inp["a"], len(inp["b"]), axis=0)
        b = np.tile(inp["b"], (len(inp["a"]), 1))
        return limb_scores(paf, a, b, 10, backend=backend)

    return {"gaussian_maps": maps, "paf_accumulate": pafs, "find_local_peaks": peaks, "limb_scores": scores}


def same(x, y):
    if isinstance(x, (tuple, list)):
        return len(x) == len(y) and all(same(a, b) for a, b in zip(x, y))
    return np.array_equal(np.asarray(x), np.asarray(y))


def best_time(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--persons", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = available_backends()
    inp = build_inputs(args.persons, args.seed)
    print(f"grid {inp['cfg'].grid.shape} persons {args.persons} backends {','.join(backends)}")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + ("     speedup" if len(backends) > 1 else ""))
    for name, fn in cases(inp).items():
        outs = [fn(b) for b in backends]
        if len(outs) > 1 and not same(outs[0], outs[1]):
            raise SystemExit(f"{name}: backends disagree")
        secs = [best_time(lambda b=b: fn(b), args.repeat) for b in backends]
        row = f"{name:<18}" + "".join(f"{s * 1e3:>10.3f}ms" for s in secs)
        if len(secs) > 1:
            row += f"{secs[0] / secs[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
