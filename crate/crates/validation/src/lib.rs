//! Acceptance checks for `cosym`; see `tests/acceptance.rs`.
