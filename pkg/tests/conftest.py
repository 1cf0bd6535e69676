"""Per-criterion pass/fail summary printed at the end of the run."""

import pytest

# criterion 8: property name -> test node ids (relative to the rootdir)
PROPERTY_TESTS = {
    "Schmidt normalization": ["tests/test_mps.py::test_schmidt_normalization_after_every_gate",
                              "tests/test_properties.py::test_schmidt_weights_normalized"],
    "entropy bounds": ["tests/test_mps.py::test_entropy_bounds_random_states",
                       "tests/test_properties.py::test_entropy_bounds"],
    "canonical idempotence": ["tests/test_mps.py::test_canonicalize_idempotent",
                              "tests/test_properties.py::test_canonicalize_idempotent"],
    "gate Hermiticity/positivity": ["tests/test_model.py::test_gates_hermitian_positive_and_real",
                                    "tests/test_properties.py::test_gates_hermitian_positive"],
    "Hamiltonian reassembly 1e-12": ["tests/test_model.py::test_bond_terms_reassemble_hamiltonian"],
    "Trotter slope 2.0 +- 0.2 (energy, literal)": [
        "tests/test_tebd.py::test_trotter_energy_error_slope_two"],
    "energy monotonicity": ["tests/test_tebd.py::test_energy_monotone_within_stage"],
    "sign-symmetry degeneracy": ["tests/test_tebd.py::test_sign_symmetry_partner"],
    "chi-doubling stability": ["tests/test_tebd.py::test_chi_doubling_stability"],
    "byte-identical reruns": ["tests/test_harness.py::test_reruns_byte_identical",
                              "tests/test_harness.py::test_cli_run_twice_byte_identical"],
    "worker-count independence": ["tests/test_harness.py::test_worker_count_independence"],
    "crash-resume equality": ["tests/test_harness.py::test_crash_resume_equality"],
}
SUPPLEMENTARY_PROPERTY_TESTS = {
    "Trotter slope 2 on observables": ["tests/test_tebd.py::test_trotter_observable_error_slope_two"],
    "Trotter slope 4 on energy": ["tests/test_tebd.py::test_trotter_energy_error_slope_four"],
}
PROPERTY_BUDGET = 300.0

_criteria = {}
_outcomes = {}


class CriterionLog:
    """Lets acceptance tests record one line per criterion."""

    def record(self, key: str, passed: bool, detail: str):
        _criteria[key] = (passed, detail)


@pytest.fixture(scope="session")
def criterion_log():
    return CriterionLog()


def _base(nodeid: str) -> str:
    return nodeid.split("[", 1)[0]


def pytest_runtest_logreport(report):
    base = _base(report.nodeid)
    outcome, duration = _outcomes.get(base, (True, 0.0))
    if report.when == "call" or report.failed:
        _outcomes[base] = (outcome and not report.failed, duration + report.duration)
    elif report.when == "setup" and not report.failed:
        _outcomes[base] = (outcome, duration + report.duration)


def _property_lines(table):
    lines = []
    total = 0.0
    ok_all = True
    for name, ids in table.items():
        seen = [_outcomes[i] for i in ids if i in _outcomes]
        if not seen:
            lines.append((None, name, "not run"))
            ok_all = False
            continue
        ok = all(o for o, _ in seen)
        total += sum(d for _, d in seen)
        ok_all &= ok
        lines.append((ok, name, f"{len(seen)} test(s)"))
    return ok_all, total, lines


def pytest_terminal_summary(terminalreporter):
    if not _criteria and not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(_criteria):
        passed, detail = _criteria[key]
        tr.write_line(f"{'PASS' if passed else 'FAIL'}  {key}: {detail}")
    ok, total, lines = _property_lines(PROPERTY_TESTS)
    if any(o is not None for o, _, _ in lines):
        within = total < PROPERTY_BUDGET
        tr.write_line(f"{'PASS' if ok and within else 'FAIL'}  C8 property suite: "
                      f"{sum(1 for o, _, _ in lines if o)}/{len(lines)} properties hold, "
                      f"{total:.0f} s (budget {PROPERTY_BUDGET:.0f} s)")
        for o, name, detail in lines:
            tag = "pass" if o else ("----" if o is None else "fail")
            tr.write_line(f"        {tag}  {name} ({detail})")
        _, _, sup = _property_lines(SUPPLEMENTARY_PROPERTY_TESTS)
        for o, name, detail in sup:
            tag = "pass" if o else ("----" if o is None else "fail")
            tr.write_line(f"        {tag}  supplementary: {name} ({detail})")
