pub mod bench;
pub mod category;
pub mod model;
pub mod protocol;
pub mod estimator;
pub mod generator;
pub mod validator;
