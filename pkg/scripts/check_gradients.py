#!/usr/bin/env python3
"""
Gradient checker
Compare tape gradients of every differentiable op and of the composed
stage-2 loss against central finite differences. The reversal op is
checked against -scale times the difference of its identity forward; the
composed loss is checked without a reversal, and with one on the heads only.
"""
import argparse
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np
from rich.console import Console
from rich.table import Table

from diffcore import (
    Tensor,
    add,
    add_bias,
    binary_cross_entropy_with_logits,
    elementwise,
    finite_difference_check,
    gather,
    grl,
    leaky_relu,
    log,
    matmul,
    mean_squared_error,
    mul,
    neg,
    parameter,
    scale,
    sigmoid,
    softmax_cross_entropy,
    sum_all,
    take_rows,
)
from modelcore import TwoStreamModel, domain_targets
from synthdomains import DomainSpec, generate

console = Console()

TOLERANCE = 1e-4


GRL_CASE_SCALE = 0.5


def op_cases(rng: np.random.Generator):
    """(name, loss_fn, leaves) for each primitive, reduced to a scalar"""
    n, m, p = rng.integers(1, 5, size=3)
    a = parameter(rng.normal(size=(n, m)))
    b = parameter(rng.normal(size=(m, p)))
    c = parameter(rng.normal(size=(n, m)))
    positive = parameter(rng.uniform(0.5, 2.0, size=(n, m)))
    bias = parameter(rng.normal(size=(1, m)))
    logits = parameter(rng.normal(size=(n, 4)))
    column = parameter(rng.normal(size=(n, 1)))
    labels = rng.integers(0, 4, size=n)
    targets = rng.integers(0, 2, size=n)
    rows = rng.integers(0, n, size=n + 1)
    
    return [
        ("matmul", lambda: sum_all(matmul(a, b)), [a, b]),
        ("add", lambda: sum_all(mul(add(a, c), c)), [a, c]),
        ("mul", lambda: sum_all(mul(a, c)), [a, c]),
        ("neg", lambda: sum_all(mul(neg(a), c)), [a]),
        ("leaky_relu", lambda: sum_all(mul(leaky_relu(a), c)), [a]),
        ("sigmoid", lambda: sum_all(mul(sigmoid(a), c)), [a]),
        ("log", lambda: sum_all(mul(log(positive), c)), [positive]),
        ("elementwise", lambda: sum_all(mul(elementwise("sigmoid", a), c)), [a]),
        ("add_bias", lambda: sum_all(mul(add_bias(a, bias), c)), [a, bias]),
        ("scale", lambda: sum_all(mul(scale(a, 1.7), c)), [a]),
        ("take_rows", lambda: sum_all(mul(take_rows(a, rows), take_rows(c, rows))), [a]),
        ("gather", lambda: sum_all(mul(gather(logits, labels), gather(logits, labels))), [logits]),
        ("grl", lambda: sum_all(mul(grl(a, GRL_CASE_SCALE), c)), [a]),
        ("softmax_cross_entropy", lambda: softmax_cross_entropy(logits, labels), [logits]),
        ("bce_with_logits", lambda: binary_cross_entropy_with_logits(column, targets), [column]),
        ("mse", lambda: mean_squared_error(column, targets), [column]),
    ]


def stage2_case(seed: int, grl_scale=None):
    """Composed L_cls + L_adv on a tiny model with refined masks"""
    spec = DomainSpec(num_classes=3, feature_dim=8, samples_per_class=4, seed=seed)
    dataset = generate(spec)
    model = TwoStreamModel(spec.num_modalities, spec.feature_dim, spec.num_classes,
                           embed_dim=8, hidden_dim=8, disc_hidden_dim=8, dropout=0.0,
                           grl_scale=grl_scale, seed=seed)
    source, target = dataset.source[:3], dataset.target[:3]
    segments = source + target
    features = model.segment_features(segments)
    labels = [s.class_label for s in source]
    rng = np.random.default_rng(seed)
    masks = []
    for _ in range(spec.num_modalities):
        keep = np.ones(len(segments), dtype=bool)
        keep[rng.integers(0, 3)] = False
        keep[3 + rng.integers(0, 3)] = False
        masks.append(keep)
    
    def loss_fn():
        embeddings = model.embed(features)
        loss_cls = model.labeled_loss([take_rows(e, range(3)) for e in embeddings], labels)
        return add(loss_cls, model.adversarial_loss(embeddings, domain_targets(segments), masks))
    
    return loss_fn, model


def main():
    parser = argparse.ArgumentParser(description="Finite-difference gradient check")
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    
    rng = np.random.default_rng(args.seed)
    worst = {}
    for _ in range(args.trials):
        for name, loss_fn, leaves in op_cases(rng):
            factor = -GRL_CASE_SCALE if name == "grl" else 1.0
            error = finite_difference_check(loss_fn, leaves, numeric_factor=factor)
            worst[name] = max(worst.get(name, 0.0), error)
    for trial in range(max(1, args.trials // 5)):
        loss_fn, model = stage2_case(args.seed + trial)
        error = finite_difference_check(loss_fn, model.parameters())
        worst["stage2 loss"] = max(worst.get("stage2 loss", 0.0), error)
        loss_fn, model = stage2_case(args.seed + trial, grl_scale=1.0)
        heads = model.classifier_parameters() + model.discriminator_parameters()
        error = finite_difference_check(loss_fn, heads)
        worst["stage2 loss, reversed (heads)"] = max(worst.get("stage2 loss, reversed (heads)", 0.0), error)
    
    table = Table(title=f"Max relative error over {args.trials} trials")
    table.add_column("op", style="cyan")
    table.add_column("max rel. error", justify="right")
    table.add_column("status")
    failed = 0
    for name, error in worst.items():
        ok = error < TOLERANCE
        failed += not ok
        table.add_row(name, f"{error:.2e}", "[green]ok[/green]" if ok else "[red]FAIL[/red]")
    console.print(table)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
