//! Work counters reported by every operation that passes messages.

use std::time::Duration;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Stats {
    pub messages_computed: u64,
    pub messages_reused: u64,
    pub messages_invalidated: u64,
    /// Stale cached messages recomputed before a plan could read them.
    pub messages_refreshed: u64,
    /// Sum of input rows fed to message and absorption joins.
    pub tuples_processed: u64,
    pub phases: Vec<(String, Duration)>,
}

impl Stats {
    pub fn merge(&mut self, o: &Stats) {
        self.messages_computed += o.messages_computed;
        self.messages_reused += o.messages_reused;
        self.messages_invalidated += o.messages_invalidated;
        self.messages_refreshed += o.messages_refreshed;
        self.tuples_processed += o.tuples_processed;
        self.phases.extend(o.phases.iter().cloned());
    }

    pub fn phase(&mut self, name: &str, d: Duration) {
        self.phases.push((name.to_string(), d));
    }
}
