//! Virtual process I/O: push buttons read by IX blocks and LEDs written
//! by QX blocks.

use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IoError {
    #[error("unknown input {0:?}")]
    UnknownInput(String),
    #[error("unknown output {0:?}")]
    UnknownOutput(String),
    #[error("input {0:?} was not sampled in time")]
    NotSampled(String),
}

#[derive(Default)]
struct Button {
    name: String,
    level: bool,
    /// Released by the next sample.
    momentary: bool,
}

#[derive(Default)]
struct State {
    inputs: Vec<Button>,
    outputs: Vec<(String, bool)>,
}

#[derive(Clone, Default)]
pub struct ProcessImage {
    inner: Arc<(Mutex<State>, Condvar)>,
}

impl ProcessImage {
    pub fn new() -> Self {
        ProcessImage::default()
    }

    fn state(&self) -> std::sync::MutexGuard<'_, State> {
        self.inner.0.lock().unwrap()
    }

    pub fn register_input(&self, name: &str) {
        let mut state = self.state();
        if !state.inputs.iter().any(|b| b.name == name) {
            state.inputs.push(Button { name: name.to_string(), ..Button::default() });
        }
    }

    pub fn register_output(&self, name: &str) {
        let mut state = self.state();
        if !state.outputs.iter().any(|(n, _)| n == name) {
            state.outputs.push((name.to_string(), false));
        }
    }

    pub fn inputs(&self) -> Vec<String> {
        self.state().inputs.iter().map(|b| b.name.clone()).collect()
    }

    /// Sets the level of a button; it stays until changed.
    pub fn press(&self, input: &str, pressed: bool) -> Result<(), IoError> {
        let mut state = self.state();
        let button = state
            .inputs
            .iter_mut()
            .find(|b| b.name == input)
            .ok_or_else(|| IoError::UnknownInput(input.to_string()))?;
        button.level = pressed;
        button.momentary = false;
        Ok(())
    }

    /// Presses a button for exactly one sample.
    pub fn press_momentary(&self, input: &str) -> Result<(), IoError> {
        let mut state = self.state();
        let button = state
            .inputs
            .iter_mut()
            .find(|b| b.name == input)
            .ok_or_else(|| IoError::UnknownInput(input.to_string()))?;
        button.level = true;
        button.momentary = true;
        Ok(())
    }

    /// Waits until a momentary press of `input` has been sampled.
    pub fn wait_sampled(&self, input: &str, timeout: Duration) -> Result<(), IoError> {
        let deadline = Instant::now() + timeout;
        let (lock, cond) = &*self.inner;
        let mut state = lock.lock().unwrap();
        loop {
            let button = state
                .inputs
                .iter()
                .find(|b| b.name == input)
                .ok_or_else(|| IoError::UnknownInput(input.to_string()))?;
            if !button.momentary {
                return Ok(());
            }
            let remaining = deadline.saturating_duration_since(Instant::now());
            if remaining.is_zero() {
                return Err(IoError::NotSampled(input.to_string()));
            }
            state = cond.wait_timeout(state, remaining).unwrap().0;
        }
    }

    /// Reads a button as an IX block does; momentary presses release here.
    pub fn sample(&self, input: &str) -> bool {
        let mut state = self.state();
        let Some(button) = state.inputs.iter_mut().find(|b| b.name == input) else {
            return false;
        };
        let level = button.level;
        if button.momentary {
            button.level = false;
            button.momentary = false;
            drop(state);
            self.inner.1.notify_all();
        }
        level
    }

    pub fn write(&self, output: &str, on: bool) {
        let mut state = self.state();
        if let Some(entry) = state.outputs.iter_mut().find(|(n, _)| n == output) {
            entry.1 = on;
        }
    }

    pub fn led(&self, output: &str) -> Result<bool, IoError> {
        self.state()
            .outputs
            .iter()
            .find(|(n, _)| n == output)
            .map(|(_, on)| *on)
            .ok_or_else(|| IoError::UnknownOutput(output.to_string()))
    }

    /// Every LED in declaration order.
    pub fn leds(&self) -> Vec<(String, bool)> {
        self.state().outputs.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn momentary_releases_after_one_sample() {
        let image = ProcessImage::new();
        image.register_input("I_OV");
        image.press_momentary("I_OV").unwrap();
        assert!(image.sample("I_OV"));
        assert!(!image.sample("I_OV"));
        image.wait_sampled("I_OV", Duration::ZERO).unwrap();
    }

    #[test]
    fn level_press_holds() {
        let image = ProcessImage::new();
        image.register_input("B");
        image.press("B", true).unwrap();
        assert!(image.sample("B") && image.sample("B"));
        assert_eq!(image.press("C", true), Err(IoError::UnknownInput("C".into())));
    }

    #[test]
    fn leds_in_order() {
        let image = ProcessImage::new();
        image.register_output("Q_C");
        image.register_output("Q_D");
        image.write("Q_D", true);
        assert_eq!(image.leds(), vec![("Q_C".into(), false), ("Q_D".into(), true)]);
        assert_eq!(image.led("Q_X"), Err(IoError::UnknownOutput("Q_X".into())));
    }
}
