"""Advanced workbench client: certification and flow-space computations."""

import logging
from typing import Any, Dict, List, Optional, Sequence

from fj_workbench.advanced.certifier import CertRequest, pipeline, verify_certificate
from fj_workbench.advanced.flowspace import (
    FlowSpaceParams,
    GeneralizedGeodesic,
    ball_homotopy_action,
    d_fs_enclosure,
    d_lambda_upper,
    dfol_check,
    is_gamma_periodic,
    flow_scale_search,
    line_cover,
)
from fj_workbench.base.client import WorkbenchClient
from fj_workbench.base.group_core import GeneratingSet, IntMatrix
from fj_workbench.config import WorkbenchConfig
from fj_workbench.errors import PreconditionFailed

logger = logging.getLogger("fjwb.client")

FLOW_OPERATIONS = ("d-fs", "dfol", "flow-scales", "line-cover", "homotopy", "periodic", "d-lambda")


class AdvancedWorkbenchClient:
    """Higher-level workbench operations built on the basic client."""

    def __init__(self, base_client: WorkbenchClient):
        """Initialize the advanced client.

        Args:
            base_client: Basic workbench client.
        """
        self.base_client = base_client

    @property
    def config(self) -> WorkbenchConfig:
        return self.base_client.config

    def certify(
        self,
        A: IntMatrix,
        L: int,
        eps: Any,
        S: Optional[GeneratingSet] = None,
        mode: Optional[str] = None,
        samples: Optional[int] = None,
        seed: Optional[int] = None,
    ) -> Dict[str, Any]:
        """Run the Farrell-Hsiang pipeline for Z^n semidirect_A Z.

        Args:
            A: Twisting matrix.
            L: Window length for the indices i_k.
            eps: Target contraction.
            S: Generating set, standard generators when omitted.
            mode: ``sampling`` or ``exhaustive``.
            samples: Number of sampled subgroups.
            seed: Seed for all randomness.

        Returns:
            Dict[str, Any]: The certificate.
        """
        req = CertRequest.from_config(A, L, eps, S, self.config, mode=mode, samples=samples, seed=seed)
        return pipeline(req).to_dict()

    def verify(self, certificate: Dict[str, Any]) -> Dict[str, Any]:
        return verify_certificate(certificate).to_dict()

    def flow(self, operation: str, arguments: Dict[str, Any]) -> Dict[str, Any]:
        """Flow-space computations on R^n.

        Operations and their arguments:

        - ``d-fs``: ``c``, ``c2`` geodesics; returns the distance with its error bound.
        - ``dfol``: ``c``, ``c2``, ``alpha``, ``eps``.
        - ``flow-scales``: ``S`` (list of vectors), ``eps``, optional ``samples``, ``seed``.
        - ``line-cover``: ``R``, optional ``samples``, ``seed``.
        - ``homotopy``: ``S``, ``R``, optional ``relators``, ``samples``.
        - ``periodic``: ``c``, ``gamma``.
        - ``d-lambda``: ``c``, ``c2``, ``Lambda``, optional ``waypoints``.

        Geodesics are {"anchor": [..], "dir": [..], "cminus": .., "cplus": ..}.

        Args:
            operation: One of the names above.
            arguments: Operation arguments.

        Returns:
            Dict[str, Any]: Operation result.
        """
        if operation not in FLOW_OPERATIONS:
            raise PreconditionFailed(f"Unknown flow operation {operation!r}; expected one of {FLOW_OPERATIONS}")
        tolerance = float(arguments.get("tolerance", self.config.quadrature_tolerance))
        seed = int(arguments.get("seed", self.config.seed))

        if operation in ("d-fs", "dfol", "d-lambda"):
            c = GeneralizedGeodesic.from_dict(arguments["c"])
            c2 = GeneralizedGeodesic.from_dict(arguments["c2"])
            params = FlowSpaceParams(c.n, tolerance=tolerance)
            if operation == "d-fs":
                value, error = d_fs_enclosure(c, c2, params)
                return {"d_fs": value, "error_bound": error, "tolerance": tolerance}
            if operation == "dfol":
                decision = dfol_check(c, c2, float(arguments["alpha"]), float(arguments["eps"]), params)
                return decision.to_dict()
            waypoints = [GeneralizedGeodesic.from_dict(w) for w in arguments.get("waypoints", [])]
            upper = d_lambda_upper(c, c2, float(arguments["Lambda"]), waypoints, params)
            return {"d_lambda_upper": upper, "waypoints": len(waypoints)}

        if operation == "flow-scales":
            report = flow_scale_search(
                _vectors(arguments["S"]),
                float(arguments["eps"]),
                samples=int(arguments.get("samples", 1000)),
                seed=seed,
            )
            return report.to_dict()
        if operation == "line-cover":
            cover, report = line_cover(arguments["R"], int(arguments.get("samples", 100)), seed)
            return {"cover": cover.to_dict(), "report": report.to_dict()}
        if operation == "homotopy":
            relators = [[(int(i), int(e)) for i, e in word] for word in arguments.get("relators", [])]
            report = ball_homotopy_action(
                _vectors(arguments["S"]),
                float(arguments["R"]),
                relators,
                samples=int(arguments.get("samples", 200)),
                seed=seed,
            )
            return report.to_dict()
        c = GeneralizedGeodesic.from_dict(arguments["c"])
        return {"periodic": is_gamma_periodic(c, float(arguments["gamma"]))}


def _vectors(data: Sequence[Sequence[Any]]) -> List[tuple]:
    return [tuple(float(a) for a in v) for v in data]
