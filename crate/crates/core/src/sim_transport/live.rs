//! Loopback UDP mode: DL frames travel through real sockets, one frame per
//! datagram, paced and timestamped with the host monotonic clock.
//!
//! Results depend on host scheduling and are not reproducible.

use std::io::Write;
use std::net::{SocketAddr, UdpSocket};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{feed_ru, fill_random, CaptureDirection, CaptureWriter, SimConfig, SimError};
use crate::du_engine::DuEngine;
use crate::low_phy::ResourceGrid;
use crate::ru_engine::{RuCounters, RuEngine};

const MAX_DATAGRAM: usize = 65_536;

#[derive(Debug, Clone)]
pub struct LiveOptions {
    /// Slots scheduled by the DU.
    pub slots: i64,
    pub bind: SocketAddr,
    /// Wall-clock slack before the first frame is due.
    pub start_margin: Duration,
    /// The receiver gives up after this much silence.
    pub idle_timeout: Duration,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self {
            slots: 20,
            bind: SocketAddr::from(([127, 0, 0, 1], 0)),
            start_margin: Duration::from_millis(5),
            idle_timeout: Duration::from_millis(500),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LiveOutcome {
    pub sent: u64,
    pub received: u64,
    pub ru: RuCounters,
}

/// Sends the DU's DL frames for `opts.slots` slots over loopback UDP and
/// runs the RU on whatever arrives, at the measured arrival times.
pub fn live_udp(cfg: &SimConfig, opts: &LiveOptions, capture: Option<&mut dyn Write>) -> Result<LiveOutcome, SimError> {
    cfg.validate()?;
    let mut du = DuEngine::new(cfg.du.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(ChaCha8Rng::seed_from_u64(cfg.seed).gen());
    let mut frames = Vec::new();
    for abs in 0..opts.slots {
        let plan = du.plan(abs);
        let grid = plan.dl.then(|| {
            let mut g = ResourceGrid::new(plan.slot, cfg.ru.nof_ports, cfg.ru.numerology.nof_prb());
            fill_random(&mut g, cfg.ue.level, &mut rng);
            g
        });
        frames.extend(du.schedule_slot(abs, du.schedule_time(abs), grid.as_ref())?);
    }
    frames.sort_by_key(|e| e.at_us);
    let Some(first_at) = frames.first().map(|e| e.at_us) else {
        return Ok(LiveOutcome { sent: 0, received: 0, ru: RuCounters::default() });
    };

    let rx = UdpSocket::bind(opts.bind)?;
    rx.set_read_timeout(Some(opts.idle_timeout))?;
    let tx = UdpSocket::bind(opts.bind)?;
    let dest = rx.local_addr()?;
    let epoch = Instant::now() + opts.start_margin;
    let to_virtual = move |t: Instant| first_at + t.saturating_duration_since(epoch).as_micros() as i64;

    let expected = frames.len();
    let receiver = thread::spawn(move || -> std::io::Result<Vec<(i64, Vec<u8>)>> {
        let mut got = Vec::with_capacity(expected);
        let mut buf = vec![0u8; MAX_DATAGRAM];
        while got.len() < expected {
            match rx.recv_from(&mut buf) {
                Ok((n, _)) => got.push((to_virtual(Instant::now()), buf[..n].to_vec())),
                Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => break,
                Err(e) => return Err(e),
            }
        }
        Ok(got)
    });

    let mut sent = 0;
    for e in &frames {
        let due = epoch + Duration::from_micros((e.at_us - first_at) as u64);
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        tx.send_to(&e.bytes, dest)?;
        sent += 1;
    }
    let mut arrivals = receiver.join().map_err(|_| SimError::Config("receiver thread panicked".into()))??;
    arrivals.sort_by_key(|(t, _)| *t);

    if let Some(w) = capture {
        let mut meta = cfg.capture_meta();
        meta.last_boundary = opts.slots;
        let mut w = CaptureWriter::new(w)?;
        w.write_meta(&meta)?;
        for (t, bytes) in &arrivals {
            w.write(CaptureDirection::ToRu, *t, bytes)?;
        }
        w.flush()?;
    }

    let mut ru = RuEngine::new(cfg.ru.clone())?;
    let received = arrivals.len() as u64;
    let lead = cfg.ru.lowphy_lead_slots as i64;
    feed_ru(&mut ru, -lead, opts.slots, arrivals.into_iter().map(Ok))?;
    Ok(LiveOutcome { sent, received, ru: ru.snapshot_counters().reception() })
}
