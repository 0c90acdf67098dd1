"""Reduced-size property checks runnable from the command line."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from . import bloch, classifier, data, quantum, reference, training, verifier


@dataclass(frozen=True)
class Check:
    group: str
    name: str
    error: float
    tol: float

    @property
    def ok(self) -> bool:
        return bool(self.error <= self.tol)


def _quantum(rng, cases):
    u_err = purity_err = prob_err = marg_err = fid_err = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 4))
        circ = quantum.random_circuit(n, 6, rng)
        u = circ.unitary()
        u_err = max(u_err, np.max(np.abs(u.conj().T @ u - np.eye(2**n))))
        rho = quantum.random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        out = quantum.apply_circuit(rho, circ)
        purity_err = max(purity_err, abs(quantum.purity(out) - quantum.purity(rho)))
        q = int(rng.integers(n))
        p0, p1 = quantum.measure_probs(out, q)
        prob_err = max(prob_err, abs(p0 + p1 - 1))
        marg_err = max(marg_err, abs(p0 - quantum.partial_trace(out, q).matrix[0, 0].real))
        psi = quantum.random_pure(n, rng)
        fid_err = max(fid_err, abs(quantum.fidelity_pure(psi, rho) - quantum.fidelity(psi.density(), rho)))
    return [
        ("unitarity", u_err, 1e-12),
        ("purity conservation", purity_err, 1e-9),
        ("probability completeness", prob_err, 1e-9),
        ("marginal consistency", marg_err, 1e-10),
        ("pure fidelity shortcut", fid_err, 1e-8),
    ]


def _bloch(rng, cases):
    orth_err = 0.0
    for n in (1, 2, 3):
        el = bloch.PauliBasis(n).elements
        gram = np.einsum("aij,bji->ab", el, el)
        orth_err = max(orth_err, np.max(np.abs(gram - (4**n - 2**n) * np.eye(len(el)))))
    rt_err = pur_err = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 4))
        rho = quantum.random_density(n, rng, rank=int(rng.integers(1, 2**n + 1)))
        v = bloch.density_to_bloch(rho)
        rt_err = max(rt_err, np.max(np.abs(bloch.bloch_to_density(v).matrix - rho.matrix)))
        pur_err = max(pur_err, abs(bloch.purity_from_bloch(v) - quantum.purity(rho)))
    return [
        ("basis orthogonality", orth_err, 1e-9),
        ("roundtrip", rt_err, 1e-10),
        ("purity from Bloch vector", pur_err, 1e-9),
    ]


def _classifier(rng, cases):
    arch = classifier.build_qcnn(4)
    dm_err = 0.0
    for _ in range(max(1, cases // 5)):
        theta = rng.uniform(-math.pi, math.pi, arch.num_params)
        rho = quantum.random_pure(4, rng).density()
        a = classifier.forward_density(arch, theta, rho)[0]
        b = classifier.forward_measured(arch, theta, rho)[0]
        dm_err = max(dm_err, abs(a - b))
    policy_mismatch = 0
    for _ in range(cases):
        theta = rng.uniform(-math.pi, math.pi, arch.num_params)
        eps = float(rng.uniform(0, 0.3))
        p0, p1 = classifier.forward(arch, theta, quantum.random_pure(4, rng))
        v2 = verifier.v2_from_p0(p0, 4)
        t = eps / math.sqrt(15)
        expect = classifier.Label.ZERO if v2 > t else classifier.Label.ONE if v2 < -t else classifier.Label.UNKNOWN
        policy_mismatch += classifier.classify(p0, p1, classifier.ClassificationPolicy(eps)) is not expect
    return [
        ("deferred measurement", dm_err, 1e-10),
        ("policy/Bloch equivalence", float(policy_mismatch), 0.0),
    ]


def _verifier(rng, cases):
    table_err = 0.0
    mono_viol = 0
    for eps, rows in reference.TABLES.items():
        cfg = verifier.VerifierConfig(eps, reference.N_QUBITS)
        for p0, _p1, v2, cos, delta, cls in rows:
            r = verifier.verify_probs(p0, cfg)
            table_err = max(table_err, abs(r.v2 - v2), abs(r.cos_theta_min - cos), abs(r.delta - delta))
            table_err = max(table_err, 0.0 if r.label.value == cls else 1.0)
    for p0, *_ in reference.TABLE_EPS_0:
        d0 = verifier.verify_probs(p0, verifier.VerifierConfig(0.0, 8)).delta
        d1 = verifier.verify_probs(p0, verifier.VerifierConfig(0.01, 8)).delta
        mono_viol += not d1 < d0
    arch = classifier.build_qcnn(2)
    violations = 0
    for k in range(max(1, cases // 10)):
        theta = rng.uniform(-math.pi, math.pi, arch.num_params)
        state = quantum.random_pure(2, rng)
        cfg = verifier.VerifierConfig(float(rng.uniform(0, 0.2)), 2)
        res = verifier.verify_state(state, arch, theta, cfg)
        if res.classified:
            violations += verifier.adversarial_probe(state, arch, theta, cfg, res, 200, seed=k) is not None
    return [
        ("table regression", table_err, 1e-5),
        ("epsilon monotonicity", float(mono_viol), 0.0),
        ("certificate soundness", float(violations), 0.0),
    ]


def _training(rng, cases):
    arch = classifier.build_qcnn(2)
    rel = 0.0
    for _ in range(max(1, cases // 10)):
        theta = rng.uniform(-math.pi, math.pi, arch.num_params)
        amps = np.array([quantum.random_pure(2, rng).amplitudes])
        labels = np.array([int(rng.integers(2))])
        g = training.gradient(arch, theta, amps, labels)

        def f(th):
            return training.batch_loss(classifier.forward_batch(arch, th, amps), labels).mean()

        h = 1e-3
        for i, e in enumerate(np.eye(arch.num_params)):
            fd = (-f(theta + 2 * h * e) + 8 * f(theta + h * e) - 8 * f(theta - h * e) + f(theta - 2 * h * e)) / (12 * h)
            if abs(fd) > 1e-8:
                rel = max(rel, abs(g[i] - fd) / abs(fd))
    delta, _ = training.adam_step(training.AdamState.zeros(1), np.array([1.0]), training.TrainConfig())
    return [
        ("parameter shift vs finite difference", rel, 1e-5),
        ("first Adam step", abs(delta[0] + 0.01 / (1 + 1e-8)), 1e-15),
    ]


def _data(rng, cases):
    px = rng.integers(0, 256, size=(28, 28))
    exact = np.array(data.downscale_exact(px), dtype=float)
    down_err = np.max(np.abs(data.downscale_16(px) - exact))
    imgs = [data.RawImage(rng.integers(0, 256, size=(28, 28)), int(rng.integers(10))) for _ in range(5)]
    blob = data.encode_idx_images(np.array([im.pixels for im in imgs]))
    rt = data.encode_idx_images(data.parse_idx_images(blob))
    return [
        ("area resampling vs exact", down_err, 1e-9),
        ("IDX roundtrip", 0.0 if rt == blob else 1.0, 0.0),
    ]


GROUPS: dict[str, Callable] = {
    "quantum": _quantum,
    "bloch": _bloch,
    "classifier": _classifier,
    "verifier": _verifier,
    "training": _training,
    "data": _data,
}


def run(groups: Optional[Iterable[str]] = None, seed: int = 0, cases: int = 20, inject: Optional[str] = None) -> list[Check]:
    """Run the named groups (all by default).

    ``inject`` names a group whose tolerances are made negative, forcing it to
    fail; it exists to test the failure path.
    """
    names = list(groups) if groups else list(GROUPS)
    unknown = [g for g in names if g not in GROUPS]
    if unknown:
        raise KeyError(f"unknown self-test group(s): {', '.join(unknown)}")
    out = []
    for g in names:
        rng = np.random.default_rng(seed)
        for name, err, tol in GROUPS[g](rng, cases):
            out.append(Check(g, name, float(err), -1.0 if g == inject else tol))
    return out
