"""scikit-learn style front end.

There is nothing to learn from data here, so the estimator is stateless in
the way ``FunctionTransformer`` is: ``fit`` validates the parameters and
``predict`` maps distances (km) to key rates.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .config import ScenarioConfig
from .scenario import ResultRow, SweepPoint, run_point

__all__ = ["KeyRateEstimator"]


class KeyRateEstimator(BaseEstimator):
    def __init__(self, protocol="bb84", source="single_photon", leakage_model="model1", alpha_sq=0.0,
                 method="sdp", intensities=(0.05, 0.1, 0.6), vacuum_decoy=False, flaw_delta=0.0,
                 test_phi=None, use_mismatch=True, detector_efficiency=0.5, dark_count_prob=1e-6,
                 loss_db_per_km=0.2, conservative=False):
        self.protocol = protocol
        self.source = source
        self.leakage_model = leakage_model
        self.alpha_sq = alpha_sq
        self.method = method
        self.intensities = intensities
        self.vacuum_decoy = vacuum_decoy
        self.flaw_delta = flaw_delta
        self.test_phi = test_phi
        self.use_mismatch = use_mismatch
        self.detector_efficiency = detector_efficiency
        self.dark_count_prob = dark_count_prob
        self.loss_db_per_km = loss_db_per_km
        self.conservative = conservative

    def _config(self) -> ScenarioConfig:
        toy = self.leakage_model == "toy"
        return ScenarioConfig(
            protocol=[self.protocol], source=self.source, leakage_model=[self.leakage_model],
            alpha_sq=[0.0 if toy else float(self.alpha_sq)], epsilon=[float(self.alpha_sq) if toy else 1.0],
            method=[self.method], intensities=list(self.intensities), vacuum_decoy=self.vacuum_decoy,
            flaw_delta=self.flaw_delta, test_phi=[] if self.test_phi is None else [float(self.test_phi)],
            use_mismatch=self.use_mismatch, detector_efficiency=self.detector_efficiency,
            dark_count_prob=self.dark_count_prob, loss_db_per_km=self.loss_db_per_km,
            conservative=self.conservative,
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        return self

    def _rows(self, X) -> list:
        if not hasattr(self, "config_"):
            self.fit()
        d = np.asarray(X, dtype=float).reshape(-1)
        cfg = self.config_
        phi = cfg.phi_grid[0]
        return [run_point(cfg, SweepPoint(cfg.method[0], cfg.protocol[0], cfg.leakage_model[0],
                                          cfg.leak_params[0], np.nan if phi is None else phi, float(km)))
                for km in d]

    def transform(self, X) -> np.ndarray:
        """Columns: rate, e_ph upper bound, bit error rate."""
        return np.array([[r.rate, r.e_ph_upper, r.e_bit] for r in self._rows(X)]).reshape(-1, 3)

    def predict(self, X) -> np.ndarray:
        return self.transform(X)[:, 0]

    def result_rows(self, X) -> list[ResultRow]:
        return self._rows(X)
