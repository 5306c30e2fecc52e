use physiogait_core::physio::{br_stream, bvp_stream, detect_pulses, hr_stream, ibi_stream, DERIVED_RATE_HZ};
use physiogait_core::{Channel, Recording};

use crate::error::Result;

/// Add heart rate, inter-beat interval (both 4 Hz), blood-volume pulse and
/// breathing rate (1 Hz) derived from the PPG channel. Inputs are untouched.
pub fn derive_channels(recording: &Recording) -> Result<Recording> {
    let ppg = recording.stream(Channel::Ppg)?;
    let pulses = detect_pulses(ppg)?;
    let mut out = recording.clone();
    out.insert(hr_stream(&pulses, DERIVED_RATE_HZ)?);
    out.insert(ibi_stream(&pulses, DERIVED_RATE_HZ)?);
    out.insert(bvp_stream(ppg)?);
    let br = br_stream(ppg, &pulses)?;
    let flagged = br.low_confidence.iter().filter(|&&f| f).count();
    if flagged > 0 {
        log::debug!("{}: {flagged}/{} breathing-rate windows low confidence", recording.subject_id, br.low_confidence.len());
    }
    out.insert(br.stream);
    Ok(out)
}
