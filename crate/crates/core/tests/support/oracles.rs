//! In-process logic oracles: no sockets, no timers.
#![allow(dead_code)]

use fbcomm::appcli::{tc1_local_net, tc2_local_net};
use fbcomm::fbcore::{
    instantiate_network, rs_behavior, EventOccurrence, EventPin, FbNetwork, Origin, ResourceRuntime, RuntimeOptions,
    StepReport,
};

pub struct Sim {
    pub rt: ResourceRuntime,
    pub reports: Vec<StepReport>,
}

impl Sim {
    pub fn new(net: &FbNetwork) -> Sim {
        let mut rt = instantiate_network(net, "local", RuntimeOptions::default()).unwrap();
        rt.cold_start();
        let reports = rt.run_until_idle(usize::MAX);
        Sim { rt, reports }
    }

    /// One sampling period of `CYCLE`, run to completion.
    pub fn tick(&mut self) {
        let fb = self.rt.fb_index("CYCLE").unwrap();
        self.rt.post_event(EventOccurrence { fb, pin: EventPin::Output(0), origin: Origin::Timer }).unwrap();
        let steps = self.rt.run_until_idle(usize::MAX);
        self.reports.extend(steps);
    }

    pub fn press(&mut self, input: &str) {
        self.rt.image().press_momentary(input).unwrap();
        self.tick();
        self.tick();
    }

    pub fn led(&self, name: &str) -> bool {
        self.rt.io_led(name).unwrap()
    }

    pub fn emissions(&self, event: &str) -> usize {
        self.reports.iter().filter_map(StepReport::fired).filter(|f| f.emitted.iter().any(|e| e == event)).count()
    }
}

/// Reset-dominant RS over all eight (S, R, state) combinations.
pub fn check_rs_table() -> Result<(), String> {
    let table = [
        ((false, false, false), false),
        ((false, false, true), true),
        ((false, true, false), false),
        ((false, true, true), false),
        ((true, false, false), true),
        ((true, false, true), true),
        ((true, true, false), false),
        ((true, true, true), false),
    ];
    for ((s, r, state), q) in table {
        let out = rs_behavior(s, r, state);
        if out.q != q || !out.emit {
            return Err(format!("s={s} r={r} state={state}: q={} emit={}", out.q, out.emit));
        }
    }
    Ok(())
}

pub fn tc1_expected(last: Option<&str>) -> (bool, bool) {
    match last {
        None | Some("I_NV") => (false, false),
        Some("I_OV") => (true, false),
        Some("I_UV") => (false, true),
        Some(other) => unreachable!("{other}"),
    }
}

pub fn sequences(alphabet: &[&'static str], max_len: usize) -> Vec<Vec<&'static str>> {
    let mut all = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for a in alphabet {
                let mut s: Vec<&str> = seq.clone();
                s.push(a);
                next.push(s);
            }
        }
        all.extend(next.iter().cloned());
        frontier = next;
    }
    all
}

/// Every press sequence of length <= 4 leaves the LEDs of the last press.
/// Returns the number of sequences checked.
pub fn check_tc1_sequences() -> Result<usize, String> {
    let net = tc1_local_net();
    let all = sequences(&["I_OV", "I_NV", "I_UV"], 4);
    for seq in &all {
        let mut sim = Sim::new(&net);
        for input in seq {
            sim.press(input);
        }
        let last = seq.last().copied();
        let got = (sim.led("Q_C"), sim.led("Q_D"));
        if got != tc1_expected(last) {
            return Err(format!("{seq:?}: (Q_C, Q_D) = {got:?}"));
        }
        for flag in ["OV", "NV", "UV"] {
            let on = last == Some(format!("I_{flag}").as_str());
            if sim.led(&format!("Q_{flag}")) != on {
                return Err(format!("{seq:?}: Q_{flag}"));
            }
        }
    }
    Ok(all.len())
}

/// Q_LO and Q_LOD follow the parity of the I_LO presses.
pub fn check_tc2_parity() -> Result<(), String> {
    let net = tc2_local_net();
    for presses in 0..=8 {
        let mut sim = Sim::new(&net);
        for _ in 0..presses {
            sim.press("I_LO");
        }
        let want = presses % 2 == 1;
        if sim.led("Q_LO") != want || sim.led("Q_LOD") != want {
            return Err(format!("{presses} presses"));
        }
    }
    Ok(())
}
