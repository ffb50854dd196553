import numpy as np
import pytest

from subface.data import SyntheticSpec, build_data_matrix, synth_gaussian_classes


def gaussian_matrix(num_classes=10, per_class=20, dim=50, ratio=10.0, seed=0,
                    center=True):
    """Separable Gaussian-class DataMatrix used as a shared oracle dataset."""
    spec = SyntheticSpec(
        num_classes=num_classes,
        samples_per_class=per_class,
        ambient_dim=dim,
        between_scale=ratio,
        within_scale=1.0,
        seed=seed,
    )
    return build_data_matrix(synth_gaussian_classes(spec), center=center)


def ring_data(n_per_class=120, radii=(1.0, 3.0), noise=0.08, seed=0):
    """Two concentric 2-D rings: nonlinearly separable, linearly hopeless."""
    rng = np.random.default_rng(seed)
    cols, labels = [], []
    for label, radius in enumerate(radii):
        theta = rng.uniform(0, 2 * np.pi, n_per_class)
        r = radius + rng.normal(0, noise, n_per_class)
        cols.append(np.stack([r * np.cos(theta), r * np.sin(theta)], axis=0))
        labels.append(np.full(n_per_class, label))
    return np.concatenate(cols, axis=1), np.concatenate(labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
