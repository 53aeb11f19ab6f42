use std::io::Write;

use serde::Serialize;

use super::placement::{map_coordinates, Direction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Assimilation,
    Rejection,
    Cull,
    Emit,
    /// Contact with receiver surface not covered by a receptor.
    BareHit,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Assimilation => "assimilation",
            EventKind::Rejection => "rejection",
            EventKind::Cull => "cull",
            EventKind::Emit => "emit",
            EventKind::BareHit => "bare_hit",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub time: f64,
    pub kind: EventKind,
    pub molecule: u64,
    pub receptor: Option<u32>,
}

/// Which event kinds are stored individually. Totals are always counted.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LogPolicy {
    pub contacts: bool,
    pub emits: bool,
    pub culls: bool,
    pub bare_hits: bool,
}

impl Default for LogPolicy {
    fn default() -> Self {
        LogPolicy {
            contacts: true,
            emits: true,
            culls: true,
            bare_hits: false,
        }
    }
}

impl LogPolicy {
    /// Receptor contacts only; enough for every rate estimate.
    pub fn contacts_only() -> Self {
        LogPolicy {
            contacts: true,
            emits: false,
            culls: false,
            bare_hits: false,
        }
    }

    pub fn everything() -> Self {
        LogPolicy {
            contacts: true,
            emits: true,
            culls: true,
            bare_hits: true,
        }
    }

    fn keeps(&self, kind: EventKind) -> bool {
        match kind {
            EventKind::Assimilation | EventKind::Rejection => self.contacts,
            EventKind::Emit => self.emits,
            EventKind::Cull => self.culls,
            EventKind::BareHit => self.bare_hits,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EventTotals {
    pub emitted: u64,
    pub assimilated: u64,
    pub rejected: u64,
    pub culled: u64,
    pub bare_hits: u64,
}

impl EventTotals {
    pub fn receptor_hits(&self) -> u64 {
        self.assimilated + self.rejected
    }

    pub fn surface_contacts(&self) -> u64 {
        self.receptor_hits() + self.bare_hits
    }
}

/// Time-ordered record of what happened during a simulation.
#[derive(Clone, Debug, Default)]
pub struct EventLog {
    pub policy: LogPolicy,
    pub events: Vec<Event>,
    pub totals: EventTotals,
}

impl EventLog {
    pub fn new(policy: LogPolicy) -> Self {
        EventLog {
            policy,
            events: Vec::new(),
            totals: EventTotals::default(),
        }
    }

    pub(crate) fn record(&mut self, time: f64, kind: EventKind, molecule: u64, receptor: Option<u32>) {
        let t = &mut self.totals;
        match kind {
            EventKind::Assimilation => t.assimilated += 1,
            EventKind::Rejection => t.rejected += 1,
            EventKind::Cull => t.culled += 1,
            EventKind::Emit => t.emitted += 1,
            EventKind::BareHit => t.bare_hits += 1,
        }
        if self.policy.keeps(kind) {
            self.events.push(Event {
                time,
                kind,
                molecule,
                receptor,
            });
        }
    }

    pub(crate) fn count_bare_hits(&mut self, n: u64) {
        self.totals.bare_hits += n;
    }

    pub fn iter_kind(&self, kind: EventKind) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    /// Writes the log as CSV with columns
    /// `time_s,event,molecule_id,receptor_id,theta_rad,phi_rad`. Receptor
    /// columns are empty for events not tied to a receptor.
    pub fn write_csv<W: Write>(&self, out: W, receptors: &[Direction]) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time_s", "event", "molecule_id", "receptor_id", "theta_rad", "phi_rad"])?;
        for e in &self.events {
            let (rid, theta, phi) = match e.receptor {
                Some(r) => {
                    let (t, p) = map_coordinates(&receptors[r as usize]);
                    (r.to_string(), t.to_string(), p.to_string())
                }
                None => (String::new(), String::new(), String::new()),
            };
            w.write_record([
                e.time.to_string(),
                e.kind.as_str().to_string(),
                e.molecule.to_string(),
                rid,
                theta,
                phi,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
