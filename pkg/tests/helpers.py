from neoseize import pca, protonn
from neoseize.container import ModelContainer
from neoseize.features import FeatureConfig
from neoseize.preprocess import PreprocessConfig


def random_container(rng, n_channels=2, d=10, window_s=4, n=120, sparsity=(1.0, 1.0, 1.0),
                     cfg=None) -> ModelContainer:
    """A small but valid container trained on random features."""
    D = 11 * n_channels
    X = rng.normal(size=(n, D))
    y = (X[:, 0] > 0).astype(int)
    p = pca.fit(X, d)
    cfg = cfg or protonn.ProtoNNConfig(proj_dim=min(4, d), n_prototypes=4, epochs=3,
                                       sparsity_W=sparsity[0], sparsity_B=sparsity[1],
                                       sparsity_Z=sparsity[2])
    model = protonn.train(p.transform(X), y, cfg)
    return ModelContainer(preprocess=PreprocessConfig(window_s=window_s), features=FeatureConfig(),
                          fs_source=256.0, n_channels=n_channels, pca=p, classifier=model)
