//! Acceptance checks for `augmi` live in `tests/acceptance.rs`. Run them with
//! `cargo test -p validation --test acceptance`.
