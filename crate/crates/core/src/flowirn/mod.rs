//! Flow-aware seed generation and instance refinement.
//!
//! CAM scores are amplified where the scene moves, thresholded into semantic
//! seeds, smoothed by a boundary-aware random walk and split into instances
//! by following displacement vectors. The flow-boundary loss ties pixel
//! affinities to the spatial gradient of optical flow.

pub mod affinity;
pub mod cam;
pub mod grouping;
pub mod jacobian;
pub mod loss;
pub mod random_walk;

pub use affinity::{line_affinity, segment, BoundaryMap, NeighborhoodSpec, DEFAULT_RADIUS};
pub use cam::{
    amplify_cam, cam_seeds, flow_magnitude_percentile, AmplifyConfig, ScoreMapStack,
    DEFAULT_FG_THRESHOLD,
};
pub use grouping::{group_by_displacement, DEFAULT_MAX_ITERS};
pub use jacobian::{flow_jacobian, FlowJacobianField, Jacobian, JacobianNorm};
pub use loss::{flow_boundary_loss, FlowBoundaryLoss, PairTerm, DEFAULT_LAMBDA};
pub use random_walk::{random_walk_refine, RandomWalkParams, TransitionMatrix};
