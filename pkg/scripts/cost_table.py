"""Print modeled FLOPs, KV-cache size and score-term speedup for long sequences.

No timing involved: this is what the cost model says the kernels should do
at sequence lengths far beyond what a CPU sweep can reach.
"""

import argparse

from sqa.config import AttentionConfig, classify_variant
from sqa.cost import attention_flops, memory_report


def variants(d_model, H):
    return [
        ("MHA", AttentionConfig(d_model, H, H, H)),
        ("GQA", AttentionConfig(d_model, H, H, H // 4)),
        ("MQA", AttentionConfig(d_model, H, H, 1)),
        ("sSQA", AttentionConfig(d_model, H, H // 2, H // 2)),
        ("SQA", AttentionConfig(d_model, H, H // 2, H // 4)),
        ("xSQA", AttentionConfig(d_model, H, H // 4, H // 4)),
    ]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d-model", type=int, default=256)
    ap.add_argument("--heads", type=int, default=16)
    ap.add_argument("--n", type=int, nargs="+", default=[1024, 32768, 131072, 200000])
    ap.add_argument("--bytes", type=int, default=2, help="bytes per cached element")
    args = ap.parse_args()

    rows = variants(args.d_model, args.heads)
    print(f"{'variant':>8} {'tag':>5} {'N':>8} {'total GFLOP':>12} {'score share':>12} {'vs MHA':>8} {'KV MiB':>9}")
    for n in args.n:
        base = attention_flops(rows[0][1], n).total
        for name, cfg in rows:
            r = attention_flops(cfg, n)
            share = (r.score_flops + r.aggregation_flops + r.softmax_flops) / r.total
            kv = memory_report(cfg, n, args.bytes).kv_cache_bytes / 2**20
            print(
                f"{name:>8} {classify_variant(cfg).value:>5} {n:>8} {r.total / 1e9:>12.2f}"
                f" {share:>12.3f} {base / r.total:>7.2f}x {kv:>9.1f}"
            )
        print()


if __name__ == "__main__":
    main()
