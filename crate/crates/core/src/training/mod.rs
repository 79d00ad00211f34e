//! Losses, optimizer, schedule, negative sampling and the training loops for node
//! classification and link prediction.

mod classify;
mod embed;
mod linkpred;
mod loss;
mod negatives;
mod optim;
mod schedule;

pub use classify::{
    argmax_rows, classification_logits, evaluate_classification, train_classification, ClassificationEval,
    ClassificationTask,
};
pub use embed::{embed_nodes, relation_importance, training_chain};
pub use linkpred::{
    evaluate_link_prediction, link_scores_of, split_edges, train_link_prediction, LinkEval, LinkPredictionTask,
};
pub use loss::{classification_loss, link_scores, linkpred_loss};
pub use negatives::{sample_negatives, NegativeSample, MAX_RETRIES};
pub use optim::{cosine_lr, Adam};
pub use schedule::{EarlyStopping, EpochRecord, StopDecision, TrainConfig, TrainReport};
