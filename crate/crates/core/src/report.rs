//! Flat counter reports: one `(entity, stream, counter, value)` row per
//! counter, written as CSV.

use std::io::Write;

use crate::delay_profile::{Finding, FindingStatus};
use crate::ofh_codec::{DataDirection, EaxcId, Plane};
use crate::ru_engine::{RuStream, StreamCounters};
use crate::sim_transport::{Analysis, LinkStats, SimOutcome};

pub const HEADER: [&str; 4] = ["entity", "stream", "counter", "value"];

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Ok = 0,
    ConfigError = 1,
    Failed = 2,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub entity: String,
    pub stream: String,
    pub counter: String,
    pub value: String,
}

/// Frame conservation for one DL stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamBalance {
    pub stream: RuStream,
    pub sent: u64,
    pub link_dropped: u64,
    pub received: StreamCounters,
}

impl StreamBalance {
    /// Sent frames that neither the link dropped nor the RU classified.
    pub fn unaccounted(&self) -> i64 {
        self.sent as i64 - self.link_dropped as i64 - self.received.total() as i64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    rows: Vec<ReportRow>,
}

fn pct(num: u64, den: u64) -> String {
    if den == 0 {
        "n/a".into()
    } else {
        format!("{:.3}", 100.0 * num as f64 / den as f64)
    }
}

pub fn eaxc_name(e: EaxcId) -> String {
    format!("eaxc{}.{}.{}.{}", e.du_port, e.band_sector, e.cc, e.ru_port)
}

fn link_rows(r: &mut Report, entity: &str, s: &LinkStats) {
    r.push(entity, "all", "frames", s.frames);
    r.push(entity, "all", "dropped", s.dropped);
    r.push(entity, "all", "min_delay_us", s.min_delay_us.map_or("n/a".into(), |v| v.to_string()));
    r.push(entity, "all", "max_delay_us", s.max_delay_us.map_or("n/a".into(), |v| v.to_string()));
}

impl Report {
    pub fn push(&mut self, entity: &str, stream: &str, counter: &str, value: impl ToString) {
        self.rows.push(ReportRow { entity: entity.into(), stream: stream.into(), counter: counter.into(), value: value.to_string() });
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn get(&self, entity: &str, stream: &str, counter: &str) -> Option<&str> {
        self.rows
            .iter()
            .find(|r| r.entity == entity && r.stream == stream && r.counter == counter)
            .map(|r| r.value.as_str())
    }

    /// Report of a finished run. `findings` is the RU/DU profile audit.
    pub fn from_outcome(out: &SimOutcome, findings: &[Finding], seed: u64) -> Self {
        let mut r = Report::default();
        r.push("run", "all", "seed", seed);
        r.push("run", "all", "end_time_us", out.end_time_us);
        r.push("run", "all", "assertions", out.assertion_count);
        r.push("run", "all", "status", if run_status(out) == ExitStatus::Ok { "ok" } else { "failed" });

        for (stream, counter, v) in out.ru.rows() {
            r.push("ru", stream, counter, v);
        }
        for (stream, counter, v) in out.du.rows() {
            r.push("du", stream, counter, v);
        }
        link_rows(&mut r, "dl_link", &out.dl_link);
        for s in RuStream::ALL {
            r.push("dl_link", s.name(), "dropped", out.dl_drops.get(&s).copied().unwrap_or(0));
        }
        link_rows(&mut r, "ul_link", &out.ul_link);

        for s in RuStream::ALL {
            let c = out.ru.stream(s);
            r.push("window", s.name(), "on_time_pct", pct(c.on_time, c.total()));
        }
        let du = &out.du;
        let ul_total = du.ul_on_time + du.ul_early + du.ul_late;
        r.push("window", "uplane_ul", "on_time_pct", pct(du.ul_on_time, ul_total));

        for b in balances(out) {
            r.push("reconcile", b.stream.name(), "sent", b.sent);
            r.push("reconcile", b.stream.name(), "link_dropped", b.link_dropped);
            r.push("reconcile", b.stream.name(), "received", b.received.total());
            r.push("reconcile", b.stream.name(), "unaccounted", b.unaccounted());
        }
        let ul_sent = out.ru.ul_frames_emitted + out.ru.prach_frames_emitted;
        let ul_unaccounted =
            ul_sent as i64 - out.ul_link.dropped as i64 - (ul_total + du.ul_decode_errors) as i64;
        r.push("reconcile", "uplane_ul", "sent", ul_sent);
        r.push("reconcile", "uplane_ul", "link_dropped", out.ul_link.dropped);
        r.push("reconcile", "uplane_ul", "received", ul_total + du.ul_decode_errors);
        r.push("reconcile", "uplane_ul", "unaccounted", ul_unaccounted);

        for (counter, v) in out.integrity.rows() {
            r.push("integrity", "all", counter, v);
        }
        r.push("integrity", "all", "verdict", if out.integrity.passed() { "pass" } else { "fail" });

        for f in findings {
            let status = match &f.status {
                FindingStatus::Ok => "ok",
                FindingStatus::Warning(_) => "warning",
            };
            r.push("validate_pair", f.field, "excess_us", f.excess_us);
            r.push("validate_pair", f.field, "status", status);
        }
        r
    }

    /// Report of an offline capture analysis.
    pub fn from_analysis(a: &Analysis) -> Self {
        let mut r = Report::default();
        r.push("capture", "all", "records", a.records);
        for s in RuStream::ALL {
            let c = a.ru.stream(s);
            r.push("ru", s.name(), "on_time", c.on_time);
            r.push("ru", s.name(), "early", c.early);
            r.push("ru", s.name(), "late", c.late);
            r.push("ru", s.name(), "no_context", c.no_context);
        }
        r.push("ru", "all", "decode_error", a.ru.decode_error);
        for s in RuStream::ALL {
            let c = a.ru.stream(s);
            r.push("window", s.name(), "on_time_pct", pct(c.on_time, c.total()));
        }
        r.push("du", "uplane_ul", "on_time", a.ul.on_time);
        r.push("du", "uplane_ul", "early", a.ul.early);
        r.push("du", "uplane_ul", "late", a.ul.late);
        r.push("du", "uplane_ul", "decode_error", a.ul.decode_error);
        let ul_total = a.ul.on_time + a.ul.early + a.ul.late;
        r.push("window", "uplane_ul", "on_time_pct", pct(a.ul.on_time, ul_total));
        for ((eaxc, dir, plane), s) in &a.sequences {
            let dir = match dir {
                DataDirection::Downlink => "dl",
                DataDirection::Uplink => "ul",
            };
            let plane = match plane {
                Plane::Control => "cplane",
                Plane::User => "uplane",
            };
            let stream = format!("{}/{plane}_{dir}", eaxc_name(*eaxc));
            r.push("sequence", &stream, "frames", s.frames);
            r.push("sequence", &stream, "gaps", s.gaps);
            r.push("sequence", &stream, "duplicates", s.duplicates);
        }
        for (eaxc, s) in &a.per_eaxc {
            let name = eaxc_name(*eaxc);
            r.push("eaxc", &name, "to_ru", s.to_ru);
            r.push("eaxc", &name, "to_du", s.to_du);
            r.push("eaxc", &name, "bytes", s.bytes);
        }
        r
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for row in &self.rows {
            out.write_record([&row.entity, &row.stream, &row.counter, &row.value])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

pub fn balances(out: &SimOutcome) -> Vec<StreamBalance> {
    RuStream::ALL
        .iter()
        .map(|&s| StreamBalance {
            stream: s,
            sent: out.du.sent(s),
            link_dropped: out.dl_drops.get(&s).copied().unwrap_or(0),
            received: *out.ru.stream(s),
        })
        .collect()
}

/// Frames discarded by either receiver for reasons other than a lossy link.
pub fn unexpected_drops(out: &SimOutcome) -> u64 {
    let ru: u64 = RuStream::ALL.iter().map(|&s| {
        let c = out.ru.stream(s);
        c.early + c.late + c.no_context
    }).sum();
    ru + out.ru.decode_error + out.du.ul_early + out.du.ul_late + out.du.ul_decode_errors
}

/// Exit status of a completed run: drops and failed integrity checks both fail.
pub fn run_status(out: &SimOutcome) -> ExitStatus {
    if unexpected_drops(out) == 0 && out.integrity.passed() && out.assertion_count == 0 {
        ExitStatus::Ok
    } else {
        ExitStatus::Failed
    }
}
