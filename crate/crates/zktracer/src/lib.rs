//! Functional simulator and performance model of a hardware accelerator for
//! zkVM trace generation.
//!
//! The crate is organised around the accelerator's two processing units and
//! the data they exchange:
//!
//! * [`field`] — exact arithmetic in the BabyBear prime field, with
//!   instrumented operation counters so higher layers can assert how much
//!   work an algorithm performs.
//! * [`trace`] — the multi-table main execution trace produced by the trace
//!   unit, and a bit-exact binary serialisation of it.
//! * [`mtu`] — the main-trace unit: an RV32IM interpreter that executes guest
//!   programs and emits trace rows between `trace_on` / `trace_off` markers.
//! * [`ptu`] — the permutation-trace unit: turns main-trace tables into
//!   fingerprint, permutation and running-sum columns for a LogUp-style
//!   multiset argument, and verifies the resulting identities.
//! * [`perf`] — a cycle-approximate performance and energy model of the
//!   pipelined accelerator, with an ablation mode and a design-space sweep.
//! * [`guests`] — small built-in RV32IM guest programs used by the test
//!   suite and the command-line tool.

pub mod field;
pub mod guests;
pub mod mtu;
pub mod perf;
pub mod ptu;
pub mod trace;
