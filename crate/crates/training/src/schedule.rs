use serde::{Deserialize, Serialize};

/// Plateau learning-rate reduction. The mechanism follows the usual
/// reduce-on-plateau scheduler; the constants (factor 0.5, patience 3,
/// min_lr 1e-6) are fixed defaults recorded in every run manifest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlateauConfig {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
}

impl Default for PlateauConfig {
    fn default() -> Self {
        PlateauConfig {
            factor: 0.5,
            patience: 3,
            min_lr: 1e-6,
        }
    }
}

/// Multiplies the learning rate by `factor` after `patience` consecutive
/// epochs without strict validation improvement.
pub struct PlateauSchedule {
    cfg: PlateauConfig,
    lr: f64,
    best: f64,
    bad_epochs: usize,
}

impl PlateauSchedule {
    pub fn new(initial_lr: f64, cfg: PlateauConfig) -> PlateauSchedule {
        PlateauSchedule {
            cfg,
            lr: initial_lr,
            best: f64::INFINITY,
            bad_epochs: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Records an epoch's validation loss; returns true when the rate was
    /// reduced.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        if val_loss < self.best {
            self.best = val_loss;
            self.bad_epochs = 0;
            return false;
        }
        self.bad_epochs += 1;
        if self.bad_epochs >= self.cfg.patience {
            self.bad_epochs = 0;
            let next = (self.lr * self.cfg.factor).max(self.cfg.min_lr);
            if next < self.lr {
                self.lr = next;
                return true;
            }
        }
        false
    }
}

/// Halts training after `patience` epochs without strict validation
/// improvement, remembering which epoch was best.
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    bad_epochs: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> EarlyStopper {
        EarlyStopper {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            bad_epochs: 0,
        }
    }

    /// Returns `(improved, should_stop)` for the 0-based `epoch`.
    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> (bool, bool) {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.bad_epochs = 0;
            (true, false)
        } else {
            self.bad_epochs += 1;
            (false, self.bad_epochs >= self.patience)
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strictly_decreasing_loss_never_reduces_lr() {
        let mut sched = PlateauSchedule::new(0.01, PlateauConfig::default());
        for i in 0..30 {
            let reduced = sched.observe(1.0 / (i + 1) as f64);
            assert!(!reduced);
        }
        assert_eq!(sched.lr(), 0.01);
    }

    #[test]
    fn plateau_of_patience_length_reduces() {
        let mut sched = PlateauSchedule::new(0.01, PlateauConfig::default());
        assert!(!sched.observe(1.0)); // establishes the best
        assert!(!sched.observe(1.0));
        assert!(!sched.observe(1.0));
        assert!(sched.observe(1.0)); // third consecutive non-improvement
        assert_eq!(sched.lr(), 0.005);
    }

    #[test]
    fn lr_never_drops_below_floor() {
        let mut sched = PlateauSchedule::new(
            4e-6,
            PlateauConfig {
                factor: 0.5,
                patience: 1,
                min_lr: 1e-6,
            },
        );
        for _ in 0..10 {
            sched.observe(1.0);
        }
        assert_eq!(sched.lr(), 1e-6);
    }

    #[test]
    fn stopper_fires_patience_epochs_after_best() {
        let mut stop = EarlyStopper::new(3);
        let losses = [5.0, 4.0, 4.5, 4.4, 4.3];
        let mut stopped_at = None;
        for (epoch, &l) in losses.iter().enumerate() {
            let (_, stop_now) = stop.observe(epoch, l);
            if stop_now {
                stopped_at = Some(epoch);
                break;
            }
        }
        assert_eq!(stop.best_epoch(), 1);
        assert_eq!(stopped_at, Some(4));
    }

    #[test]
    fn improving_run_never_stops() {
        let mut stop = EarlyStopper::new(2);
        for epoch in 0..50 {
            let (improved, stop_now) = stop.observe(epoch, 100.0 - epoch as f64);
            assert!(improved);
            assert!(!stop_now);
        }
        assert_eq!(stop.best_epoch(), 49);
    }
}
