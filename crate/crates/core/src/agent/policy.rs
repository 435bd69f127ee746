use rand::Rng;

use crate::error::{Error, Result};

/// Index of the largest value; ties are broken uniformly at random.
pub fn greedy_action<R: Rng + ?Sized>(q_values: &[f64], rng: &mut R) -> Result<usize> {
    let first = *q_values
        .first()
        .ok_or_else(|| Error::Contract("argmax over an empty action set".into()))?;
    let best = q_values.iter().copied().fold(first, f64::max);
    let ties = q_values.iter().filter(|&&q| q == best).count();
    if ties <= 1 {
        return Ok(q_values.iter().position(|&q| q == best).unwrap_or(0));
    }
    let pick = rng.random_range(0..ties);
    Ok(q_values
        .iter()
        .enumerate()
        .filter(|(_, &q)| q == best)
        .nth(pick)
        .map(|(i, _)| i)
        .expect("pick < ties"))
}

/// Uniform action with probability `epsilon`, greedy otherwise.
pub fn epsilon_greedy<R: Rng + ?Sized>(
    q_values: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    if q_values.is_empty() {
        return Err(Error::Contract(
            "epsilon-greedy over an empty action set".into(),
        ));
    }
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        Ok(rng.random_range(0..q_values.len()))
    } else {
        greedy_action(q_values, rng)
    }
}
