import numpy as np
import pytest

from kaeval.dataset import AlignedDataset, Variation, align
from kaeval.synth import SynthSpec, generate


def make_cluster_ad(k=4, n_per_class=12, p=6, noise=0.4, separation=1.0, seed=0,
                    variation=Variation.UNSPECIFIED) -> AlignedDataset:
    spec = SynthSpec(kind="clusters", k=k, n_per_class=n_per_class, p=p,
                     noise=noise, separation=separation, seed=seed,
                     variation=variation)
    return align(*generate(spec))


def make_onehot_ad(k=7, n_per_class=70, separation=1.0, seed=0) -> AlignedDataset:
    spec = SynthSpec(kind="onehot", k=k, n_per_class=n_per_class, p=k,
                     separation=separation, seed=seed)
    return align(*generate(spec))


def make_noise_ad(k=7, n_per_class=50, p=32, seed=0) -> AlignedDataset:
    spec = SynthSpec(kind="noise", k=k, n_per_class=n_per_class, p=p, seed=seed)
    return align(*generate(spec))


def instance_battery(count: int, seed: int = 0, max_n: int = 200):
    """Varied synthetic instances for property sweeps (deterministic).

    Dimensions start at 4 and noise at 0.3 so kernel spectra stay away from
    the near-degenerate regime where truncated eigensubspaces stop being
    unique (the regime the equivalence and permutation guarantees exclude).
    """
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        k = int(rng.integers(2, 6))
        n_per_class = int(rng.integers(6, max(7, max_n // k // 2)))
        p = int(rng.integers(4, 13))
        noise = float(rng.uniform(0.3, 1.2))
        out.append(make_cluster_ad(k=k, n_per_class=n_per_class, p=p, noise=noise,
                                   separation=float(rng.uniform(0.8, 1.6)),
                                   seed=1000 + i))
    return out


@pytest.fixture(scope="session")
def small_cluster_ad():
    return make_cluster_ad()
