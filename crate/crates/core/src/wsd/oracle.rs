use std::collections::HashMap;

use super::{AnnotationService, ClusterDecision, ClusterView, QueueItem, Verdict, WsdSession};
use crate::error::Result;
use crate::ontology::LabelSet;

/// Test double for the human annotator that answers from known labels.
///
/// A cluster is judged pertinent when a strict majority of its displayed
/// samples carry the reviewed category in `truth`; otherwise it is
/// `other_sense`. Samples without a truth entry count as not pertinent.
#[derive(Debug, Clone)]
pub struct OracleAnnotator {
    pub truth: HashMap<String, LabelSet>,
    pub annotator_id: String,
    /// Timestamp given to the first decision; later ones add one second each.
    pub start_time: i64,
}

impl OracleAnnotator {
    pub fn new(truth: HashMap<String, LabelSet>) -> Self {
        OracleAnnotator {
            truth,
            annotator_id: "oracle".into(),
            start_time: 0,
        }
    }

    pub fn judge(&self, view: &ClusterView) -> Verdict {
        let hits = view
            .samples
            .iter()
            .filter(|s| self.truth.get(&s.tweet_id).is_some_and(|l| l.contains(view.category)))
            .count();
        if 2 * hits > view.samples.len() {
            Verdict::Pertinent
        } else {
            Verdict::OtherSense
        }
    }

    fn decision(&self, view: &ClusterView, n: usize) -> ClusterDecision {
        ClusterDecision {
            cluster_id: view.cluster_id.clone(),
            category: view.category,
            verdict: self.judge(view),
            annotator_id: self.annotator_id.clone(),
            decided_at: self.start_time + n as i64,
        }
    }

    /// Reviews every category until it is done and returns the decisions made.
    pub fn run(&self, session: &mut WsdSession) -> Result<Vec<ClusterDecision>> {
        let mut made = Vec::new();
        let categories: Vec<_> = session.categories().collect();
        for cat in categories {
            while let QueueItem::Cluster(view) = session.next_cluster(cat) {
                let d = self.decision(&view, made.len());
                session.record_decision(d.clone())?;
                made.push(d);
            }
        }
        Ok(made)
    }

    /// Same as [`run`](Self::run) but journals through the service. Decisions
    /// already in the journal are kept.
    pub fn run_service(&self, service: &mut AnnotationService) -> Result<usize> {
        let categories: Vec<_> = service.session().categories().collect();
        let mut n = service.session().journal().len();
        let start = n;
        for cat in categories {
            while let QueueItem::Cluster(view) = service.next(cat) {
                service.decide(self.decision(&view, n))?;
                n += 1;
            }
        }
        Ok(n - start)
    }
}
