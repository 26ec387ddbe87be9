//! Python bindings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyBytes;

use ofh_core::delay_profile::{self as profiles, FindingStatus, FronthaulDelay, PresetName, Side};
use ofh_core::iq_compress::{self, CompParams, CompressedPrb, IqBlock, VALUES_PER_PRB};
use ofh_core::ofh_codec::{self, OfhMessage};
use ofh_core::report::{run_status, ExitStatus, Report};
use ofh_core::scenario::ScenarioConfig;
use ofh_core::sim_transport::{self, CaptureDirection};
use ofh_core::timing;

fn err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A slot on the radio frame grid.
#[pyclass(frozen, eq, hash, from_py_object, module = "ofhsim")]
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
struct SlotPoint(timing::SlotPoint);

#[pymethods]
impl SlotPoint {
    #[new]
    fn new(mu: u8, sfn: u16, subframe: u8, slot: u8) -> PyResult<Self> {
        timing::SlotPoint::new(mu, sfn, subframe, slot).map(Self).map_err(err)
    }

    #[staticmethod]
    fn from_system_slot(mu: u8, n: u64) -> Self {
        Self(timing::SlotPoint::from_system_slot(mu, n))
    }

    #[getter]
    fn mu(&self) -> u8 {
        self.0.mu()
    }
    #[getter]
    fn sfn(&self) -> u16 {
        self.0.sfn()
    }
    #[getter]
    fn subframe(&self) -> u8 {
        self.0.subframe()
    }
    #[getter]
    fn slot(&self) -> u8 {
        self.0.slot()
    }

    fn system_slot(&self) -> u32 {
        self.0.system_slot()
    }

    fn offset(&self, delta: i64) -> Self {
        Self(self.0.offset(delta))
    }

    /// Forward distance in slots to `other`, modulo the hyperframe.
    fn diff_to(&self, other: &SlotPoint) -> PyResult<u32> {
        timing::calculate_slot_diff(self.0, other.0).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("SlotPoint({})", self.0)
    }
}

/// Carrier numerology and symbol timing.
#[pyclass(frozen, module = "ofhsim")]
struct Numerology(timing::NumerologyConfig);

#[pymethods]
impl Numerology {
    #[new]
    fn new(mu: u8, sampling_rate_hz: u64, nof_prb: u16) -> PyResult<Self> {
        timing::NumerologyConfig::new(mu, sampling_rate_hz, nof_prb).map(Self).map_err(err)
    }

    #[getter]
    fn fft_size(&self) -> usize {
        self.0.fft_size()
    }
    #[getter]
    fn samples_per_slot(&self) -> u64 {
        self.0.samples_per_slot()
    }
    #[getter]
    fn samples_per_subframe(&self) -> u64 {
        self.0.samples_per_subframe()
    }

    /// Symbol lengths, cyclic prefix included, over one subframe.
    fn symbol_sizes(&self) -> Vec<u32> {
        self.0.symbol_sizes().to_vec()
    }

    /// `(slot, symbol, sample_in_symbol)` of a sample counted from the hyperframe start.
    fn locate(&self, sample: u64) -> (SlotPoint, usize, u32) {
        let p = timing::slot_point_from_sample_time(timing::SampleTimestamp(sample), &self.0);
        (SlotPoint(p.slot), p.symbol, p.sample)
    }
}

fn preset_name(name: &str) -> PyResult<PresetName> {
    name.parse().map_err(err)
}

/// Named delay-profile preset as `(field, microseconds)` pairs; `side` is "ru" or "du".
#[pyfunction]
fn delay_profile(preset: &str, side: &str) -> PyResult<Vec<(&'static str, u32)>> {
    let side: Side = side.parse().map_err(err)?;
    Ok(profiles::preset(preset, side).map_err(err)?.rows())
}

/// Audits a preset's DU profile against its RU profile.
/// Returns `(field, excess_us, warning or None)` per bound.
#[pyfunction]
#[pyo3(signature = (preset, t12_min=0, t12_max=0, t34_min=0, t34_max=0))]
fn validate_pair(
    preset: &str,
    t12_min: u32,
    t12_max: u32,
    t34_min: u32,
    t34_max: u32,
) -> PyResult<Vec<(&'static str, u32, Option<String>)>> {
    let name = preset_name(preset)?;
    let fh = FronthaulDelay::new(t12_min, t12_max, t34_min, t34_max).map_err(err)?;
    let findings = profiles::validate_pair(&profiles::ru_preset(name), &profiles::du_preset(name), &fh);
    Ok(findings
        .into_iter()
        .map(|f| {
            let warning = match f.status {
                FindingStatus::Ok => None,
                FindingStatus::Warning(w) => Some(w),
            };
            (f.field, f.excess_us, warning)
        })
        .collect())
}

fn block(values: Vec<i16>) -> PyResult<IqBlock> {
    let arr: [i16; VALUES_PER_PRB] =
        values.try_into().map_err(|v: Vec<i16>| err(format!("a PRB holds {VALUES_PER_PRB} values, got {}", v.len())))?;
    Ok(IqBlock(arr))
}

/// Block floating point compression of one PRB (24 interleaved I/Q values).
/// Returns `(exponent, mantissas)`.
#[pyfunction]
fn bfp_compress(values: Vec<i16>, iq_width: u8) -> PyResult<(u8, Vec<i16>)> {
    let params = CompParams::bfp(iq_width).map_err(err)?;
    let c = iq_compress::compress(&block(values)?, params);
    Ok((c.exponent, c.mantissas.to_vec()))
}

#[pyfunction]
fn bfp_decompress(exponent: u8, mantissas: Vec<i16>, iq_width: u8) -> PyResult<Vec<i16>> {
    let params = CompParams::bfp(iq_width).map_err(err)?;
    let prb = CompressedPrb { params, exponent, mantissas: block(mantissas)?.0 };
    Ok(iq_compress::decompress(&prb).0.to_vec())
}

/// eCPRI/O-RAN frame codec for one carrier.
#[pyclass(frozen, module = "ofhsim")]
struct Codec(ofh_codec::OfhCodec);

#[pymethods]
impl Codec {
    #[new]
    fn new(mu: u8, nof_prb: u16) -> Self {
        Self(ofh_codec::OfhCodec::new(ofh_codec::CodecConfig::new(mu, nof_prb)))
    }

    /// Summary of a frame: plane, eAxC, sequence id, timing and section count.
    fn decode(&self, bytes: &[u8]) -> PyResult<FrameInfo> {
        let f = self.0.decode(bytes).map_err(err)?;
        let (plane, app, sections, prbs) = match &f.message {
            OfhMessage::CPlane(m) => ("cplane", m.app, m.sections.len(), 0),
            OfhMessage::UPlane(m) => ("uplane", m.app, m.sections.len(), m.sections.iter().map(|s| s.prbs.len()).sum()),
        };
        let e = f.eaxc;
        Ok(FrameInfo {
            plane,
            downlink: app.data_direction == ofh_codec::DataDirection::Downlink,
            eaxc: (e.du_port, e.band_sector, e.cc, e.ru_port),
            seq_id: f.seq_id,
            filter_index: app.filter_index,
            frame_id: app.frame_id,
            subframe_id: app.subframe_id,
            slot_id: app.slot_id,
            start_symbol_id: app.start_symbol_id,
            sections,
            prbs,
        })
    }

    /// Decodes and re-encodes a frame.
    fn reencode<'py>(&self, py: Python<'py>, bytes: &[u8]) -> PyResult<Bound<'py, PyBytes>> {
        let f = self.0.decode(bytes).map_err(err)?;
        let out = self.0.encode(&f.message, f.eaxc, f.seq_id).map_err(err)?;
        Ok(PyBytes::new(py, &out))
    }
}

#[pyclass(frozen, get_all, module = "ofhsim")]
struct FrameInfo {
    plane: &'static str,
    downlink: bool,
    eaxc: (u8, u8, u8, u8),
    seq_id: u8,
    filter_index: u8,
    frame_id: u8,
    subframe_id: u8,
    slot_id: u8,
    start_symbol_id: u8,
    sections: usize,
    prbs: usize,
}

#[pymethods]
impl FrameInfo {
    fn __repr__(&self) -> String {
        format!(
            "FrameInfo({} {} eaxc={:?} seq={} {}.{}.{} sym {})",
            self.plane,
            if self.downlink { "dl" } else { "ul" },
            self.eaxc,
            self.seq_id,
            self.frame_id,
            self.subframe_id,
            self.slot_id,
            self.start_symbol_id
        )
    }
}

/// A scenario file, editable before running.
#[pyclass(module = "ofhsim")]
struct Scenario(ScenarioConfig);

#[pymethods]
impl Scenario {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ScenarioConfig::from_toml(text).map(Self).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        ScenarioConfig::load(path).map(Self).map_err(err)
    }

    #[getter]
    fn n_frames(&self) -> u32 {
        self.0.n_frames
    }
    #[setter]
    fn set_n_frames(&mut self, n: u32) {
        self.0.n_frames = n;
    }

    fn to_toml(&self) -> String {
        self.0.to_toml()
    }

    /// Runs the simulation; with `capture` the frame capture is kept on the result.
    #[pyo3(signature = (seed=None, capture=false))]
    fn run(&self, py: Python<'_>, seed: Option<u64>, capture: bool) -> PyResult<SimResult> {
        let sc = self.0.build(seed).map_err(err)?;
        py.detach(|| {
            let mut cap = Vec::new();
            let out = sim_transport::run(&sc.sim, capture.then_some(&mut cap as &mut dyn std::io::Write)).map_err(err)?;
            let report = Report::from_outcome(&out, &sc.findings, sc.sim.seed);
            Ok(SimResult {
                ok: run_status(&out) == ExitStatus::Ok,
                integrity_passed: out.integrity.passed(),
                rows: report.rows().iter().map(|r| (r.entity.clone(), r.stream.clone(), r.counter.clone(), r.value.clone())).collect(),
                csv: report.to_csv(),
                capture: capture.then_some(cap),
            })
        })
    }
}

#[pyclass(frozen, module = "ofhsim")]
struct SimResult {
    #[pyo3(get)]
    ok: bool,
    #[pyo3(get)]
    integrity_passed: bool,
    rows: Vec<(String, String, String, String)>,
    csv: String,
    capture: Option<Vec<u8>>,
}

#[pymethods]
impl SimResult {
    /// Report rows as `(entity, stream, counter, value)`.
    fn rows(&self) -> Vec<(String, String, String, String)> {
        self.rows.clone()
    }

    fn get(&self, entity: &str, stream: &str, counter: &str) -> Option<String> {
        self.rows.iter().find(|r| r.0 == entity && r.1 == stream && r.2 == counter).map(|r| r.3.clone())
    }

    fn to_csv(&self) -> String {
        self.csv.clone()
    }

    #[getter]
    fn capture<'py>(&self, py: Python<'py>) -> Option<Bound<'py, PyBytes>> {
        self.capture.as_ref().map(|c| PyBytes::new(py, c))
    }
}

/// Replays a capture against the window profiles stored in it and returns the report CSV.
#[pyfunction]
fn analyze_capture(py: Python<'_>, capture: &[u8]) -> PyResult<String> {
    let bytes = capture.to_vec();
    py.detach(move || sim_transport::analyze(&bytes, None, None).map(|a| Report::from_analysis(&a).to_csv()).map_err(err))
}

/// Records of a capture as `(direction, time_us, frame)`; direction is "to_ru", "to_du" or "meta".
#[pyfunction]
fn capture_records<'py>(py: Python<'py>, capture: &[u8]) -> PyResult<Vec<(&'static str, i64, Bound<'py, PyBytes>)>> {
    let records = sim_transport::read_capture(capture).map_err(err)?;
    Ok(records
        .iter()
        .map(|r| {
            let dir = match r.direction {
                CaptureDirection::ToRu => "to_ru",
                CaptureDirection::ToDu => "to_du",
                CaptureDirection::Meta => "meta",
            };
            (dir, r.time_us, PyBytes::new(py, &r.bytes))
        })
        .collect())
}

#[pymodule]
fn ofhsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SlotPoint>()?;
    m.add_class::<Numerology>()?;
    m.add_class::<Codec>()?;
    m.add_class::<FrameInfo>()?;
    m.add_class::<Scenario>()?;
    m.add_class::<SimResult>()?;
    m.add_function(wrap_pyfunction!(delay_profile, m)?)?;
    m.add_function(wrap_pyfunction!(validate_pair, m)?)?;
    m.add_function(wrap_pyfunction!(bfp_compress, m)?)?;
    m.add_function(wrap_pyfunction!(bfp_decompress, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_capture, m)?)?;
    m.add_function(wrap_pyfunction!(capture_records, m)?)?;
    Ok(())
}
