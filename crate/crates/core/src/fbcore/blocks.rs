//! Built-in fixed-function blocks.

use std::time::Duration;

use super::queue::Origin;
use super::runtime::{Behavior, FbContext};
use super::types::GateKind;
use crate::value::Value;

/// Output of one RS trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsOutput {
    pub q: bool,
    /// Q is republished on every trigger.
    pub emit: bool,
}

/// Reset-dominant latch.
pub fn rs_behavior(s: bool, r: bool, state: bool) -> RsOutput {
    let q = if r {
        false
    } else if s {
        true
    } else {
        state
    };
    RsOutput { q, emit: true }
}

/// Evaluates a gate; `inputs` must match the gate's arity.
pub fn gate_behavior(kind: GateKind, inputs: &[bool]) -> bool {
    match (kind, inputs) {
        (GateKind::Or2, [a, b]) => *a || *b,
        (GateKind::And2, [a, b]) => *a && *b,
        (GateKind::Not, [a]) => !*a,
        _ => panic!("{kind:?} gate given {} inputs", inputs.len()),
    }
}

#[derive(Default)]
pub(crate) struct Rs {
    state: bool,
}

impl Behavior for Rs {
    fn on_event(&mut self, _event: usize, ctx: &mut FbContext<'_>) {
        let out = rs_behavior(ctx.input_bool(0), ctx.input_bool(1), self.state);
        self.state = out.q;
        ctx.set_output(0, Value::Bool(out.q));
        if out.emit {
            ctx.emit(0);
        }
    }
}

pub(crate) struct Gate(pub GateKind);

impl Behavior for Gate {
    fn on_event(&mut self, _event: usize, ctx: &mut FbContext<'_>) {
        let inputs: Vec<bool> = (0..ctx.input_count()).map(|i| ctx.input_bool(i)).collect();
        ctx.set_output(0, Value::Bool(gate_behavior(self.0, &inputs)));
        ctx.emit(0);
    }
}

/// E_CYCLE: START arms a periodic timer of DT milliseconds, STOP disarms it.
#[derive(Default)]
pub(crate) struct Cycle;

const START: usize = 0;

impl Behavior for Cycle {
    fn on_event(&mut self, event: usize, ctx: &mut FbContext<'_>) {
        if event == START {
            let ms = ctx.input(0).as_i64().unwrap_or(0);
            if ms > 0 {
                ctx.start_timer(Duration::from_millis(ms as u64));
            }
        } else {
            ctx.stop_timer();
        }
    }

    fn on_output(&mut self, event: usize, origin: Origin, ctx: &mut FbContext<'_>) {
        // a tick queued before STOP is discarded
        if matches!(origin, Origin::Timer) && ctx.timer_running() {
            ctx.emit(event);
        }
    }
}

/// IX: samples its button on REQ; IND fires on rising edges only.
#[derive(Default)]
pub(crate) struct Ix {
    last: bool,
}

impl Behavior for Ix {
    fn on_event(&mut self, _event: usize, ctx: &mut FbContext<'_>) {
        let level = ctx.image().sample(ctx.name());
        ctx.set_output(0, Value::Bool(level));
        if level && !self.last {
            ctx.emit(0);
        }
        self.last = level;
    }
}

/// QX: drives its LED from OUT on REQ.
#[derive(Default)]
pub(crate) struct Qx;

impl Behavior for Qx {
    fn on_event(&mut self, _event: usize, ctx: &mut FbContext<'_>) {
        let on = ctx.input_bool(0);
        ctx.image().write(ctx.name(), on);
        ctx.emit(0);
    }
}
