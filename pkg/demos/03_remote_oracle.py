#!/usr/bin/env python3
# Attack through the HTTP wire protocol instead of the in-process oracle.
# Starts the bridge sidecar (toy backend) on a free port, points the rate
# limited client at it, and runs a short search end to end over base64 PNGs.
#
# Requires the oracle-bridge package:  pip install -e oracle_bridge

from gapatch import (ImagePair, OptimizerConfig, ThrottleConfig, build_corpus,
                     default_placement, remote_similarity_client, render_photo,
                     run_greedy)
from oracle_bridge import BridgeServer, ToyBackend

corpus = build_corpus(1, 20, 4)
pair = ImagePair(render_photo(corpus, 0, 0), render_photo(corpus, 0, 1))

with BridgeServer(ToyBackend()) as server:
    print(f"bridge up at {server.url}")
    oracle = remote_similarity_client(server.url, ThrottleConfig(max_qps=None))
    health = oracle.health_check()
    print(f"health: {health}")

    s = oracle.similarity(pair.image_a, pair.image_b)
    print(f"clean genuine-pair similarity over the wire: {s:.6f}")

    # short run; each candidate costs 4 scalar queries through the client
    oracle.set_phase("optimization")
    config = OptimizerConfig(n_iters=25, batch_size=4, restart_interval=10)
    result = run_greedy(config, pair, default_placement(), oracle)
    print(f"best loss {result.best_loss:.4f}, "
          f"queries spent {oracle.ledger.phase_count('optimization')}, "
          f"server handled {server.requests_served} requests")
