use crate::model::{posterior_tau, Class, MixtureParams};
use crate::sample::PartialSample;

/// What a fitted mixture's component labels are aligned against.
#[derive(Debug, Clone, Copy)]
pub enum Reference<'a> {
    /// Agreement of posterior allocation with the classified rows.
    Classified(&'a PartialSample),
    /// Closeness of the component means to a known truth.
    Truth(&'a MixtureParams),
}

/// Higher is better: the number of classified rows allocated to their label,
/// or the negated squared distance between matched means.
pub fn agreement_score(theta: &MixtureParams, reference: Reference<'_>) -> f64 {
    match reference {
        Reference::Classified(sample) => sample
            .rows()
            .zip(sample.labels())
            .filter_map(|(y, l)| l.map(|c| (y, c)))
            .filter(|(y, c)| {
                let allocated = match posterior_tau(y, theta) {
                    Ok((t1, t2)) if t1 >= t2 => Class::Class1,
                    Ok(_) => Class::Class2,
                    Err(_) => return false,
                };
                allocated == *c
            })
            .count() as f64,
        Reference::Truth(truth) => {
            -((theta.mu1() - truth.mu1()).norm_squared()
                + (theta.mu2() - truth.mu2()).norm_squared())
        }
    }
}

/// Returns `theta_hat` or its component-swapped version, whichever agrees
/// better with the reference. Ties keep the original labeling.
pub fn resolve_label_switching(
    theta_hat: &MixtureParams,
    reference: Reference<'_>,
) -> MixtureParams {
    let swapped = theta_hat.swapped();
    if agreement_score(&swapped, reference) > agreement_score(theta_hat, reference) {
        swapped
    } else {
        theta_hat.clone()
    }
}
