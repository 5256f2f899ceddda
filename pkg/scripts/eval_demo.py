"""Generate a small corpus, validate it, and run the closed-loop mock evaluation with and without typos."""

import argparse

from retmem.dataset import CorpusSpec, build_corpus
from retmem.evaluation import evaluate, validate_corpus

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reads", type=int, default=600)
    ap.add_argument("--writes", type=int, default=200)
    a = ap.parse_args()

    corpus = build_corpus(CorpusSpec(seed=a.seed, reads=a.reads, writes=a.writes))
    check = validate_corpus(corpus)
    print(f"corpus: {check['instances']} instances, {check['failed']} failed validation")

    reads = [inst for inst in corpus if inst.type != "write"]
    print("\nclean questions")
    print(evaluate(reads).table())
    print("\nquestions with one typo in the person name")
    print(evaluate(reads, typo_seed=a.seed).table())
