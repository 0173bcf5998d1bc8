"""scikit-learn style facade over the packed convolution."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError
from .packing.plan import make_plan
from .tensor import ConvDims, HeParams, Tensor
from .tiling import comm_cost
from .validation import check_batch, check_positive, check_weights


class PackedConv2d(TransformerMixin, BaseEstimator):
    """Grouped convolution evaluated through polynomial coefficient packing.

    ``fit`` checks shapes against ``weights`` and plans the packing; ``transform``
    runs pack, negacyclic multiply and extract on every sample.  Outputs are
    residues mod ``2**bits`` as ``uint64``.
    """

    def __init__(self, weights=None, n=4096, scheme="falcon_tiled", stride=1, bits=32):
        self.weights = weights
        self.n = n
        self.scheme = scheme
        self.stride = stride
        self.bits = bits

    def fit(self, X, y=None):
        batch = check_batch(X, self.bits)
        if self.weights is None:
            raise DimensionError("weights are required")
        w = check_weights(self.weights, self.bits)
        _, c, h, width = batch.shape
        k, g, r, _ = w.shape
        self.dims_ = ConvDims(H=h, W=width, C=c, R=r, K=k, G=g,
                              stride=check_positive(self.stride, "stride"))
        self.params_ = HeParams(n=check_positive(self.n, "n"), bits=self.bits)
        self.plan_ = make_plan(self.scheme, self.dims_, self.params_)
        self.layout_ = getattr(self.plan_, "layout", None)
        self.weights_ = Tensor(w, self.bits)
        self.n_features_in_ = c * h * width
        return self

    def transform(self, X):
        check_is_fitted(self, "plan_")
        batch = check_batch(X, self.bits)
        d = self.dims_
        if batch.shape[1:] != (d.C, d.H, d.W):
            raise DimensionError(f"fitted for {(d.C, d.H, d.W)}, got {batch.shape[1:]}")
        out = [self.plan_.evaluate(Tensor(x, self.bits), self.weights_).data for x in batch]
        return np.stack(out)

    def communication(self):
        """Model cost report for the fitted geometry."""
        check_is_fitted(self, "plan_")
        framework = self.scheme if self.scheme in ("iron", "cheetah", "falcon") else "falcon_tiled"
        return comm_cost(framework, self.dims_, self.params_)
