//! Versioned plain-text serialization of a trained actor.
//!
//! ```text
//! tvtune-actor 1
//! sizes 9 100 100 4
//! activations relu tanh
//! action_bounds 4e1 1e3
//! obs_scale 1e3 1e3 ...
//! params 11904
//! <one parameter per line>
//! ```
//!
//! Floats are written in shortest round-trip exponent form, so a load
//! reproduces every bit of the saved network.

use std::fs;
use std::path::Path;

use super::mlp::{Activation, Mlp};
use super::NetSpec;
use crate::env::{Action, Observation};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &str = "tvtune-actor";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ActorModel {
    pub spec: NetSpec,
    pub net: Mlp,
}

impl ActorModel {
    pub fn act(&self, obs: &[f64]) -> Vec<f64> {
        self.net
            .forward(&self.spec.normalize_obs(obs))
            .into_iter()
            .map(|u| self.spec.denormalize_action(u))
            .collect()
    }

    /// Greedy weights for the torque-vectoring environment.
    pub fn policy(&self, obs: &Observation) -> Action {
        let mut w = [0.0; Action::DIM];
        for (wi, a) in w.iter_mut().zip(self.act(&obs.as_array())) {
            *wi = a;
        }
        Action::new(w)
    }

    pub fn to_text(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION}\n");
        let sizes: Vec<String> = self.net.sizes().iter().map(usize::to_string).collect();
        out += &format!("sizes {}\n", sizes.join(" "));
        out += &format!(
            "activations {} {}\n",
            self.net.hidden_activation().tag(),
            self.net.output_activation().tag()
        );
        out += &format!(
            "action_bounds {}\n",
            join(&[self.spec.action_low, self.spec.action_high])
        );
        out += &format!("obs_scale {}\n", join(&self.spec.obs_scale));
        out += &format!("params {}\n", self.net.param_count());
        for p in self.net.params() {
            out += &format!("{p:e}\n");
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::ModelFormat(msg);
        let mut lines = text.lines().enumerate();
        let mut next = |key: &str| -> Result<Vec<String>> {
            let (n, line) = lines
                .next()
                .ok_or_else(|| bad(format!("missing `{key}` line")))?;
            let mut fields = line.split_whitespace();
            if fields.next() != Some(key) {
                return Err(bad(format!("line {}: expected `{key}`", n + 1)));
            }
            Ok(fields.map(str::to_owned).collect())
        };
        let float = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| bad(format!("not a number: `{s}`")))
        };

        let version = next(MODEL_MAGIC)?;
        match version.as_slice() {
            [v] if v.parse::<u32>().ok() == Some(MODEL_VERSION) => {}
            _ => return Err(bad(format!("unsupported version {version:?}"))),
        }
        let sizes = next("sizes")?
            .iter()
            .map(|s| {
                s.parse::<usize>()
                    .map_err(|_| bad(format!("bad size `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let acts = next("activations")?;
        let [hidden, output] = acts.as_slice() else {
            return Err(bad("expected two activation tags".into()));
        };
        let act = |t: &str| {
            Activation::from_tag(t).ok_or_else(|| bad(format!("unknown activation `{t}`")))
        };
        let (hidden, output) = (act(hidden)?, act(output)?);
        let bounds = next("action_bounds")?
            .iter()
            .map(|s| float(s))
            .collect::<Result<Vec<_>>>()?;
        let [low, high] = bounds.as_slice() else {
            return Err(bad("expected two action bounds".into()));
        };
        let obs_scale = next("obs_scale")?
            .iter()
            .map(|s| float(s))
            .collect::<Result<Vec<_>>>()?;
        let count = next("params")?;
        let count: usize = match count.as_slice() {
            [c] => c
                .parse()
                .map_err(|_| bad(format!("bad parameter count `{c}`")))?,
            _ => return Err(bad("expected one parameter count".into())),
        };
        let params = lines
            .map(|(_, l)| float(l.trim()))
            .collect::<Result<Vec<_>>>()?;
        if params.len() != count {
            return Err(bad(format!(
                "declared {count} parameters, found {}",
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter".into()));
        }
        let net = Mlp::from_params(&sizes, hidden, output, params)?;
        let spec = NetSpec {
            obs_scale,
            action_dim: net.output_dim(),
            action_low: *low,
            action_high: *high,
        };
        spec.validate()
            .map_err(|e| bad(format!("invalid network spec: {e}")))?;
        if spec.obs_dim() != net.input_dim() {
            return Err(bad(format!(
                "{} observation scales for a {}-input network",
                spec.obs_dim(),
                net.input_dim()
            )));
        }
        Ok(Self { spec, net })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddpg::{DdpgAgent, Hyperparams};

    fn model() -> ActorModel {
        let mut agent =
            DdpgAgent::new(NetSpec::torque_vectoring(), Hyperparams::default(), 17).unwrap();
        agent.actor.params_mut()[0] = -0.0;
        agent.actor.params_mut()[1] = 1e-310;
        agent.actor.params_mut()[2] = 0.1 + 0.2;
        agent.model()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = model();
        let back = ActorModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back.spec, m.spec);
        let bits = |n: &Mlp| n.params().iter().map(|p| p.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.net), bits(&m.net));
        assert_eq!(back.to_text(), m.to_text());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("actor.txt");
        let m = model();
        m.save(&path).unwrap();
        assert_eq!(ActorModel::load(&path).unwrap(), m);
        assert!(matches!(
            ActorModel::load(&dir.path().join("missing")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rejects_corruption() {
        let text = model().to_text();
        let cases = [
            text.replacen("tvtune-actor 1", "tvtune-actor 2", 1),
            text.replacen("sizes 9", "sizes 8", 1),
            text.replacen("relu", "gelu", 1),
            text.lines().take(20).collect::<Vec<_>>().join("\n"),
            format!("{text}0.5\n"),
            text.replacen("params", "parameters", 1),
        ];
        for c in cases {
            assert!(matches!(
                ActorModel::from_text(&c),
                Err(Error::ModelFormat(_))
            ));
        }
    }

    #[test]
    fn policy_within_bounds() {
        let m = model();
        let a = m.policy(&Observation::from_array([1e6; 9]));
        assert!(a.in_bounds());
    }
}
