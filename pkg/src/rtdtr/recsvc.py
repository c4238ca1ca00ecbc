"""HTTP service for live dose-stratum recommendation sessions.

A session holds one simulated patient. The physician fixes a dose range and
a stratification threshold up front; `advance` steps the patient forward,
samples the policy's switching events on the dt grid and recommends a
stratum for the next window; the physician then applies a concrete dose,
with an explicit override path when the choice contradicts the
recommendation. All quantities the console displays originate here.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .core import OXYTOCIN_LINEXP, IntensitySpec, log_intensity
from .csl import CslConfig, load_csl_config
from .simgen import make_rng

DEFAULT_WINDOW_HOURS = 0.5


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.detail = detail


class CreateSessionRequest(BaseModel):
    baseline: dict = Field(default_factory=dict)
    dose_range: tuple[float, float] = (0.0, 8.0)
    delta: Optional[float] = None
    eta: Optional[list[float]] = None
    seed: int = 0
    window_hours: float = DEFAULT_WINDOW_HOURS


class AdvanceRequest(BaseModel):
    dt_steps: Optional[int] = None


class DoseRequest(BaseModel):
    dose: float
    override: bool = False


@dataclass
class Session:
    session_id: str
    cfg: CslConfig
    z_bmi: float
    baseline: dict
    dose_range: tuple
    delta: float
    eta: np.ndarray
    seed: int
    window_hours: float
    rng: np.random.Generator
    clock: float = 0.0
    step_index: int = 0
    dose: float = 0.0
    z3: float = 3.0
    last_change: float = 0.0
    recommended: Optional[int] = None
    completed: bool = False
    history: list = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def stratum(self) -> int:
        if self.delta == 0.0:
            return int(self.dose > 0.0)
        return int(self.dose >= self.delta)


def _stratum_of(dose: float, delta: float) -> int:
    return int(dose > 0.0) if delta == 0.0 else int(dose >= delta)


class SessionStore:
    """In-memory store; the interface is the contract a durable backend
    would implement."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def add(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.session_id] = session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ApiError(404, "unknown_session", f"no session {session_id!r}")
        return session


def _snapshot(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "clock": session.clock,
        "dose": session.dose,
        "stratum": session.stratum,
        "z3": session.z3,
        "z_bmi": session.z_bmi,
        "delta": session.delta,
        "dose_range": list(session.dose_range),
        "eta": [float(v) for v in session.eta],
        "window_hours": session.window_hours,
        "recommended_stratum": session.recommended,
        "completed": session.completed,
        "last_change": session.last_change,
        "history": list(session.history),
    }


def _intensity(session: Session) -> float:
    spec = IntensitySpec(OXYTOCIN_LINEXP, session.eta)
    gap = session.clock - session.last_change
    return float(
        np.exp(log_intensity(spec, session.stratum, session.z3, gap, session.z_bmi))
    )


def create_app(csl_cfg: Optional[CslConfig] = None) -> FastAPI:
    app = FastAPI(title="dose-stratum recommendation service")
    cfg = csl_cfg or load_csl_config()
    store = SessionStore()
    app.state.store = store

    @app.exception_handler(ApiError)
    async def _api_error(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"code": exc.code, "message": exc.message, "detail": exc.detail},
        )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        lo, hi = req.dose_range
        if not (0.0 <= lo < hi):
            raise ApiError(400, "invalid_range", f"invalid dose range [{lo}, {hi}]")
        delta = req.delta
        if delta is None:
            delta = (lo + hi) / 2.0
        if delta != 0.0 and not (lo < delta <= hi):
            raise ApiError(400, "invalid_threshold", f"threshold {delta} outside ({lo}, {hi}]")
        if "bmi" not in req.baseline:
            raise ApiError(422, "missing_covariates", "baseline must include 'bmi'")
        eta = np.asarray(
            req.eta if req.eta is not None else cfg.policy_default, dtype=float
        )
        if eta.shape != (4,):
            raise ApiError(400, "invalid_policy", "eta must have 4 components")
        if not np.all(np.isfinite(eta)):
            raise ApiError(400, "invalid_policy", "eta must be finite")
        rng = make_rng(req.seed, 0x5E55)
        z3_0 = req.baseline.get(
            "dilation", float(cfg.dil_start_lo + (cfg.dil_start_hi - cfg.dil_start_lo) * rng.random())
        )
        session = Session(
            session_id=uuid.uuid4().hex[:12],
            cfg=cfg,
            z_bmi=cfg.standardize_bmi(float(req.baseline["bmi"])),
            baseline=dict(req.baseline),
            dose_range=(float(lo), float(hi)),
            delta=float(delta),
            eta=eta,
            seed=req.seed,
            window_hours=float(req.window_hours),
            rng=rng,
            dose=float(lo),
            z3=float(z3_0),
        )
        session.history.append(
            {
                "kind": "created",
                "time": 0.0,
                "dose": session.dose,
                "stratum": session.stratum,
                "intensity": _intensity(session),
                "recommendation": None,
            }
        )
        store.add(session)
        return {"session_id": session.session_id, "snapshot": _snapshot(session)}

    @app.get("/sessions/{session_id}")
    def get_state(session_id: str):
        return _snapshot(store.get(session_id))

    @app.post("/sessions/{session_id}/advance")
    def advance(session_id: str, req: AdvanceRequest):
        session = store.get(session_id)
        with session.lock:
            if session.completed:
                raise ApiError(409, "session_completed", "session already completed")
            grid = session.cfg.grid
            dt = grid.dt
            steps = req.dt_steps
            if steps is None:
                steps = int(round(session.window_hours / dt))
            if steps < 1:
                raise ApiError(400, "invalid_window", "dt_steps must be >= 1")
            spec = IntensitySpec(OXYTOCIN_LINEXP, session.eta)
            times, lams, events = [], [], []
            n_events = 0
            rec = session.stratum
            for _ in range(steps):
                k = session.step_index
                if k % grid.cov_stride == 0 and k > 0:
                    rate = (
                        session.cfg.dil_rate_base
                        + session.cfg.dil_rate_dose * session.dose / session.cfg.dose_max
                        + session.cfg.dil_rate_bmi * session.z_bmi
                    )
                    session.z3 = float(
                        np.clip(
                            session.z3
                            + rate * grid.covariate_dt
                            + session.cfg.dil_noise_sd
                            * np.sqrt(grid.covariate_dt)
                            * session.rng.standard_normal(),
                            0.0,
                            session.cfg.delivered_at + 2.0,
                        )
                    )
                    if session.z3 >= session.cfg.delivered_at:
                        session.completed = True
                t = k * dt
                gap = t - session.last_change
                lam = float(
                    np.exp(log_intensity(spec, rec, session.z3, gap, session.z_bmi))
                )
                fired = bool(session.rng.random() < min(lam * dt, 1.0))
                times.append(t)
                lams.append(lam)
                events.append(fired)
                if fired:
                    n_events += 1
                    rec = 1 - rec
                session.step_index += 1
                session.clock = session.step_index * dt
                if session.clock >= grid.t_end - 1e-12:
                    session.completed = True
                if session.completed:
                    break
            survival = float(np.exp(-np.sum(np.asarray(lams) * dt)))
            session.recommended = rec
            session.history.append(
                {
                    "kind": "advance",
                    "time": session.clock,
                    "dose": session.dose,
                    "stratum": session.stratum,
                    "intensity": lams[-1] if lams else None,
                    "recommendation": rec,
                    "events": int(n_events),
                    "survival_probability": survival,
                }
            )
            return {
                "clock": session.clock,
                "times": times,
                "intensity": lams,
                "events": events,
                "n_events": n_events,
                "recommended_stratum": rec,
                "survival_probability": survival,
                "z3": session.z3,
                "completed": session.completed,
                "current_stratum": session.stratum,
            }

    @app.post("/sessions/{session_id}/dose")
    def apply_dose(session_id: str, req: DoseRequest):
        session = store.get(session_id)
        with session.lock:
            if session.completed:
                raise ApiError(409, "session_completed", "session already completed")
            lo, hi = session.dose_range
            if not (lo <= req.dose <= hi):
                raise ApiError(
                    400, "dose_out_of_range", f"dose {req.dose} outside [{lo}, {hi}]"
                )
            new_stratum = _stratum_of(req.dose, session.delta)
            rec = session.recommended
            if rec is not None and new_stratum != rec and not req.override:
                raise ApiError(
                    409,
                    "stratum_mismatch",
                    "dose lands outside the recommended stratum",
                    detail={"recommended_stratum": rec, "proposed_stratum": new_stratum},
                )
            changed = new_stratum != session.stratum
            session.dose = float(req.dose)
            if changed:
                session.last_change = session.clock
            session.history.append(
                {
                    "kind": "dose",
                    "time": session.clock,
                    "dose": session.dose,
                    "stratum": session.stratum,
                    "intensity": _intensity(session),
                    "recommendation": rec,
                    "override": bool(req.override and rec is not None and new_stratum != rec),
                }
            )
            return _snapshot(session)

    return app


app = create_app()
