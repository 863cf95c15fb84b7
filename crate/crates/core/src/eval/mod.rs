//! Evaluation: confusion counts and IoU, split statistics, submission
//! archives and cloud-to-cloud distances.

pub mod c2c;
pub mod confusion;
pub mod splits;
pub mod submission;

pub use c2c::{cloud_to_cloud, CloudDistances, DistanceSummary, KdTree};
pub use confusion::{confusion, miou, ConfusionMatrix, IouReport};
pub use splits::{percent_tenths, split_statistics, SplitAssignment, SplitTable};
pub use submission::{
    read_submission, read_validated, validate_submission, write_submission, SubmissionRules,
    ZoneLabels,
};
