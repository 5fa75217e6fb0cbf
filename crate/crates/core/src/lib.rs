//! Natural-language access control toolkit.
//!
//! Access-control policies are written as access matrices whose rows are
//! roles/users, columns are tables/views, and cells are the permitted SQL
//! operators. Headers and cells may be plain SQL or natural language. The
//! crate synthesizes SQL implementations (CREATE ROLE / CREATE VIEW / GRANT
//! scripts) from such matrices, introspects database catalogs back into
//! all-SQL matrices, and audits implementations against policies by
//! differencing the two.
//!
//! Natural-language steps go through [`gateway::Gateway`], which supports a
//! live chat-completion backend, a replay backend driven by recorded
//! fixtures, and a rule-table oracle backend, so every pipeline can run
//! deterministically in tests and CI.

pub mod acm;
pub mod benchgen;
pub mod catalog;
pub mod deployment;
pub mod differencer;
pub mod error;
pub mod gateway;
pub mod hierarchy;
pub mod synthesizer;

pub use error::{Error, Result};
