use pyo3::prelude::*;
use pyo3::types::PyDict;

use gravcollapse_py::gravcollapse_module;

fn with_module(code: &str) {
    pyo3::append_to_inittab!(gravcollapse_module);
    Python::initialize();
    Python::attach(|py| {
        let locals = PyDict::new(py);
        let code = std::ffi::CString::new(code).unwrap();
        py.run(&code, None, Some(&locals)).map_err(|e| e.display(py)).unwrap();
    });
}

#[test]
fn module_round_trip() {
    with_module(
        r#"
import math
import gravcollapse as gc
a = gc.MassDistribution.gaussian(1e-3, 1e-2)
b = a.translated([5e-2, 0.0, 0.0])
spec = gc.Superposition(a, b)
assert abs(spec.weights[0] - 0.5) < 1e-12
ed = gc.e_delta(spec)
assert ed > 0
assert abs(gc.collapse_time(spec) - gc.PhysicalConstants().hbar / ed) < 1e-9 * gc.collapse_time(spec)
k = gc.PhysicalConstants(G=6.67e-11)
assert k.G == 6.67e-11
try:
    gc.PhysicalConstants(hbar=-1.0)
    raise AssertionError("accepted")
except ValueError:
    pass
"#,
    );
}
