"""Independent reference for the FSDP unit planner.

Prints the message-size table CSV for the fixture used by the CLI and
acceptance tests, plus the brute-force optimal grouping for one setup.
"""

HEADER = "dp,blocks_per_unit,shard_bytes,busbw_bytes_per_sec,latency_share,step_comm_seconds"


def block_params(h, f, nq, nkv, d):
    q = nq * d
    kv = nkv * d
    mats = [(h, q), (h, kv), (h, kv), (q, h), (h, f), (h, f), (f, h)]
    return sum(a * b for a, b in mats) + 2 * h


def row(shape, alpha, bw, dp, g):
    h, f, nq, nkv, d, layers, w = shape
    params = g * block_params(h, f, nq, nkv, d)
    shard = -(-params // dp) * w
    t = (dp - 1) * (alpha + shard / bw)
    units = -(-layers // g)
    step = units * (2.0 * t + t)
    busbw = (dp * shard) / t * (dp - 1) / dp
    share = (dp - 1) * alpha / t
    return dp, g, shard, busbw, share, step


def main():
    llama = (4096, 14336, 32, 8, 128, 32, 2)
    alpha, bw = 1e-5, 1e10
    print(HEADER)
    for dp in (8, 64, 1024):
        for g in (1, 2, 4, 8):
            dp_, g_, shard, busbw, share, step = row(llama, alpha, bw, dp, g)
            print(f"{dp_},{g_},{shard},{busbw!r},{share!r},{step!r}")
    cap = 2 * 1024**3
    block_bytes = block_params(*llama[:5]) * llama[6]
    best = min(
        (g for g in range(1, 33) if g * block_bytes <= cap),
        key=lambda g: (row(llama, alpha, bw, 1024, g)[5], g),
    )
    print(f"# best g at dp=1024, cap=2GiB: {best}")


if __name__ == "__main__":
    main()
