use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One event handed to a postsynaptic layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Delivery {
    pub connection: usize,
    /// Timestep whose input current the event contributes to.
    pub t: usize,
    pub source: usize,
    pub delay: usize,
}

/// Deliveries recorded by an executor, in the order they happened.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    records: Vec<Delivery>,
}

impl EventLog {
    pub fn push(&mut self, connection: usize, t: usize, source: usize, delay: usize) {
        self.records.push(Delivery {
            connection,
            t,
            source,
            delay,
        });
    }

    pub fn records(&self) -> &[Delivery] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Orders by connection, timestep, source, delay.
    pub fn sort(&mut self) {
        self.records.sort_unstable();
    }

    /// Sorted copy, so logs from different executors can be compared.
    pub fn canonical(&self) -> Vec<Delivery> {
        let mut v = self.records.clone();
        v.sort_unstable();
        v
    }

    /// One `connection t source delay` line per delivery in canonical order.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# connection t source delay\n");
        for d in self.canonical() {
            let _ = writeln!(out, "{} {} {} {}", d.connection, d.t, d.source, d.delay);
        }
        out
    }
}
