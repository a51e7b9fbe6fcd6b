use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{
    assemble_labeled_set, CategoryProgress, CleaningReport, ClusterDecision, Journal, LabeledExample, QueueItem,
    WsdSession,
};
use crate::error::Result;
use crate::ontology::EventCategory;

/// A session whose accepted decisions are persisted to a journal file.
#[derive(Debug)]
pub struct AnnotationService {
    session: WsdSession,
    journal: Journal,
    keyword_tweets: BTreeMap<EventCategory, BTreeSet<String>>,
}

impl AnnotationService {
    /// Opens the journal at `path` and replays it into `session`.
    pub fn open(
        mut session: WsdSession,
        path: &Path,
        keyword_tweets: BTreeMap<EventCategory, BTreeSet<String>>,
    ) -> Result<Self> {
        let (journal, prior) = Journal::open(path)?;
        session.replay(prior)?;
        Ok(AnnotationService {
            session,
            journal,
            keyword_tweets,
        })
    }

    pub fn session(&self) -> &WsdSession {
        &self.session
    }

    pub fn progress(&self) -> Vec<CategoryProgress> {
        self.session.all_progress()
    }

    pub fn next(&self, category: EventCategory) -> QueueItem {
        self.session.next_cluster(category)
    }

    /// Validates, applies and journals one decision.
    pub fn decide(&mut self, decision: ClusterDecision) -> Result<CategoryProgress> {
        let progress = self.session.record_decision(decision.clone())?;
        self.journal.append(&decision)?;
        Ok(progress)
    }

    pub fn export(&self) -> (Vec<LabeledExample>, CleaningReport) {
        assemble_labeled_set(self.session.decisions(), self.session.queues(), &self.keyword_tweets)
    }
}
