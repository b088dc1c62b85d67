//! iSLIP crossbar scheduling: iterative request/grant/accept matching with
//! rotating round-robin pointers.
//!
//! Each epoch runs a fixed number of iterations over the request matrix.
//! Per iteration every unmatched output grants the requesting unmatched
//! input closest to its grant pointer (clockwise), and every unmatched
//! input accepts the granting output closest to its accept pointer.
//! Pointers advance one past the partner, and only for accepts made in the
//! first iteration; that single rule desynchronises the pointers until
//! saturated uniform traffic settles into rotating perfect matchings.

use thiserror::Error;

use crate::router::BufferState;

#[derive(Debug, Error, PartialEq)]
pub enum SchedulerError {
    #[error("port count must be at least 1, got {0}")]
    InvalidPortCount(usize),
    #[error("request matrix is {requests} ports but pointer state is {state}")]
    PortCountMismatch { requests: usize, state: usize },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("pointer value {value} out of range for {ports} ports")]
    PointerOutOfRange { value: usize, ports: usize },
    #[error("matching already pairs input {input} or output {output}")]
    ConflictingPair { input: usize, output: usize },
    #[error("pair ({input}, {output}) addresses a {ports}-port matrix")]
    PairOutOfRange {
        input: usize,
        output: usize,
        ports: usize,
    },
}

/// Boolean demand matrix: `(input, output)` is set when that virtual
/// output queue holds at least one packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RequestMatrix {
    ports: usize,
    cells: Vec<bool>,
}

impl RequestMatrix {
    pub fn new(ports: usize) -> Self {
        RequestMatrix {
            ports,
            cells: vec![false; ports * ports],
        }
    }

    /// Builds from rows of 0/1 flags; rows must form a square matrix.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self, SchedulerError> {
        let ports = rows.len();
        if ports == 0 {
            return Err(SchedulerError::InvalidPortCount(0));
        }
        let mut matrix = RequestMatrix::new(ports);
        for (input, row) in rows.iter().enumerate() {
            if row.len() != ports {
                return Err(SchedulerError::InvalidPortCount(row.len()));
            }
            for (output, &set) in row.iter().enumerate() {
                if set {
                    matrix.set(input, output);
                }
            }
        }
        Ok(matrix)
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn set(&mut self, input: usize, output: usize) {
        self.cells[input * self.ports + output] = true;
    }

    pub fn get(&self, input: usize, output: usize) -> bool {
        self.cells[input * self.ports + output]
    }

    pub fn request_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        self.request_count() == 0
    }
}

/// A one-to-one pairing of inputs to outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    ports: usize,
    output_of_input: Vec<Option<usize>>,
    input_of_output: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(ports: usize) -> Self {
        Matching {
            ports,
            output_of_input: vec![None; ports],
            input_of_output: vec![None; ports],
        }
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    /// Adds a pair; both endpoints must be free.
    pub fn insert(&mut self, input: usize, output: usize) -> Result<(), SchedulerError> {
        if input >= self.ports || output >= self.ports {
            return Err(SchedulerError::PairOutOfRange {
                input,
                output,
                ports: self.ports,
            });
        }
        if self.output_of_input[input].is_some() || self.input_of_output[output].is_some() {
            return Err(SchedulerError::ConflictingPair { input, output });
        }
        self.output_of_input[input] = Some(output);
        self.input_of_output[output] = Some(input);
        Ok(())
    }

    pub fn output_of(&self, input: usize) -> Option<usize> {
        self.output_of_input.get(input).copied().flatten()
    }

    pub fn input_of(&self, output: usize) -> Option<usize> {
        self.input_of_output.get(output).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.output_of_input.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_perfect(&self) -> bool {
        self.len() == self.ports
    }

    /// Pairs ordered by input port.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.output_of_input
            .iter()
            .enumerate()
            .filter_map(|(input, output)| output.map(|o| (input, o)))
            .collect()
    }

    /// True when no unmatched input still requests an unmatched output.
    pub fn is_maximal_for(&self, requests: &RequestMatrix) -> bool {
        for input in 0..self.ports {
            if self.output_of(input).is_some() {
                continue;
            }
            for output in 0..self.ports {
                if requests.get(input, output) && self.input_of(output).is_none() {
                    return false;
                }
            }
        }
        true
    }
}

/// Round-robin pointer state carried between epochs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IslipState {
    grant_ptr: Vec<usize>,
    accept_ptr: Vec<usize>,
}

impl IslipState {
    /// All pointers at port 0, the conventional reset state.
    pub fn new(ports: usize) -> Result<Self, SchedulerError> {
        if ports == 0 {
            return Err(SchedulerError::InvalidPortCount(ports));
        }
        Ok(IslipState {
            grant_ptr: vec![0; ports],
            accept_ptr: vec![0; ports],
        })
    }

    pub fn with_pointers(grant: Vec<usize>, accept: Vec<usize>) -> Result<Self, SchedulerError> {
        if grant.is_empty() || grant.len() != accept.len() {
            return Err(SchedulerError::InvalidPortCount(grant.len()));
        }
        let ports = grant.len();
        for &value in grant.iter().chain(accept.iter()) {
            if value >= ports {
                return Err(SchedulerError::PointerOutOfRange { value, ports });
            }
        }
        Ok(IslipState {
            grant_ptr: grant,
            accept_ptr: accept,
        })
    }

    pub fn ports(&self) -> usize {
        self.grant_ptr.len()
    }

    pub fn grant_pointers(&self) -> &[usize] {
        &self.grant_ptr
    }

    pub fn accept_pointers(&self) -> &[usize] {
        &self.accept_ptr
    }
}

/// Runs one scheduling epoch: up to `iterations` request/grant/accept
/// rounds against `requests`, mutating the pointer state per the
/// first-iteration rule. Returns the matching for this epoch.
pub fn islip(
    requests: &RequestMatrix,
    state: &mut IslipState,
    iterations: usize,
) -> Result<Matching, SchedulerError> {
    if iterations == 0 {
        return Err(SchedulerError::ZeroIterations);
    }
    if requests.ports() != state.ports() {
        return Err(SchedulerError::PortCountMismatch {
            requests: requests.ports(),
            state: state.ports(),
        });
    }
    let ports = requests.ports();
    let mut matching = Matching::empty(ports);

    for iteration in 0..iterations {
        // Grant: each unmatched output picks the first unmatched requesting
        // input at or clockwise after its grant pointer.
        let mut grant_of_output: Vec<Option<usize>> = vec![None; ports];
        for (output, grant) in grant_of_output.iter_mut().enumerate() {
            if matching.input_of(output).is_some() {
                continue;
            }
            for step in 0..ports {
                let input = (state.grant_ptr[output] + step) % ports;
                if matching.output_of(input).is_none() && requests.get(input, output) {
                    *grant = Some(input);
                    break;
                }
            }
        }

        // Accept: each unmatched input picks the first granting output at
        // or clockwise after its accept pointer.
        let mut accepted: Vec<(usize, usize)> = Vec::new();
        for input in 0..ports {
            if matching.output_of(input).is_some() {
                continue;
            }
            for step in 0..ports {
                let output = (state.accept_ptr[input] + step) % ports;
                if grant_of_output[output] == Some(input) {
                    accepted.push((input, output));
                    break;
                }
            }
        }

        if accepted.is_empty() {
            break;
        }
        for &(input, output) in &accepted {
            matching
                .insert(input, output)
                .expect("grant and accept phases pair each port at most once");
            if iteration == 0 {
                state.grant_ptr[output] = (input + 1) % ports;
                state.accept_ptr[input] = (output + 1) % ports;
            }
        }
    }
    Ok(matching)
}

/// Convenience wrapper: schedules one epoch directly from buffer demand.
pub fn schedule_epoch(
    buffer: &BufferState,
    state: &mut IslipState,
    iterations: usize,
) -> Result<Matching, SchedulerError> {
    islip(&buffer.request_matrix(), state, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn requests_from(bits: &[&[u8]]) -> RequestMatrix {
        let rows: Vec<Vec<bool>> = bits
            .iter()
            .map(|row| row.iter().map(|&b| b != 0).collect())
            .collect();
        RequestMatrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn lone_request_is_granted_and_pointers_advance() {
        let mut requests = RequestMatrix::new(4);
        requests.set(1, 2);
        let mut state = IslipState::new(4).unwrap();
        let matching = islip(&requests, &mut state, 1).unwrap();
        assert_eq!(matching.pairs(), vec![(1, 2)]);
        assert_eq!(state.grant_pointers(), &[0, 0, 2, 0]);
        assert_eq!(state.accept_pointers(), &[0, 3, 0, 0]);
    }

    #[test]
    fn two_port_full_demand_matches_both_within_two_iterations() {
        let requests = requests_from(&[&[1, 1], &[1, 1]]);
        let mut state = IslipState::new(2).unwrap();
        let matching = islip(&requests, &mut state, 2).unwrap();
        assert!(matching.is_perfect());
        // Both outputs grant input 0 in iteration one; input 0 accepts
        // output 0, then the second iteration pairs the leftovers.
        assert_eq!(matching.pairs(), vec![(0, 0), (1, 1)]);
        assert_eq!(state.grant_pointers(), &[1, 0]);
        assert_eq!(state.accept_pointers(), &[1, 0]);
    }

    #[test]
    fn later_iterations_leave_pointers_alone() {
        let requests = requests_from(&[&[1, 1], &[1, 1]]);
        let mut one = IslipState::new(2).unwrap();
        let mut two = IslipState::new(2).unwrap();
        islip(&requests, &mut one, 1).unwrap();
        islip(&requests, &mut two, 2).unwrap();
        // The second iteration added a pair but no pointer movement.
        assert_eq!(one, two);
    }

    #[test]
    fn empty_demand_yields_empty_matching_and_frozen_pointers() {
        let requests = RequestMatrix::new(4);
        let mut state =
            IslipState::with_pointers(vec![1, 2, 3, 0], vec![3, 2, 1, 0]).unwrap();
        let before = state.clone();
        let matching = islip(&requests, &mut state, 4).unwrap();
        assert!(matching.is_empty());
        assert_eq!(state, before);
    }

    #[test]
    fn matching_never_violates_requests() {
        let requests = requests_from(&[
            &[0, 1, 0, 1],
            &[1, 0, 0, 0],
            &[0, 1, 1, 0],
            &[1, 1, 1, 1],
        ]);
        let mut state = IslipState::new(4).unwrap();
        for _ in 0..32 {
            let matching = islip(&requests, &mut state, 4).unwrap();
            for (input, output) in matching.pairs() {
                assert!(requests.get(input, output));
            }
            assert!(matching.is_maximal_for(&requests));
        }
    }

    #[test]
    fn more_iterations_never_shrink_the_matching() {
        let requests = requests_from(&[
            &[1, 1, 0, 0],
            &[1, 1, 0, 0],
            &[0, 0, 1, 1],
            &[0, 0, 1, 1],
        ]);
        let mut sizes = Vec::new();
        for iterations in 1..=4 {
            let mut state = IslipState::new(4).unwrap();
            let matching = islip(&requests, &mut state, iterations).unwrap();
            sizes.push(matching.len());
        }
        for pair in sizes.windows(2) {
            assert!(pair[1] >= pair[0]);
        }
    }

    #[test]
    fn saturation_desynchronises_into_rotating_perfect_matchings() {
        // All sixteen VOQs loaded: after a short transient every epoch is a
        // perfect matching and each input cycles through all four outputs.
        let requests = requests_from(&[&[1; 4], &[1; 4], &[1; 4], &[1; 4]]);
        let mut state = IslipState::new(4).unwrap();
        for _ in 0..16 {
            islip(&requests, &mut state, 1).unwrap();
        }
        let mut served: Vec<Vec<usize>> = vec![Vec::new(); 4];
        for _ in 0..4 {
            let matching = islip(&requests, &mut state, 1).unwrap();
            assert!(matching.is_perfect());
            for (input, output) in matching.pairs() {
                served[input].push(output);
            }
        }
        for outputs in &served {
            let mut sorted = outputs.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, vec![0, 1, 2, 3], "one grant per output per window");
        }
    }

    #[test]
    fn identical_inputs_produce_identical_matchings() {
        let requests = requests_from(&[
            &[1, 0, 1, 0],
            &[0, 1, 0, 1],
            &[1, 1, 0, 0],
            &[0, 0, 1, 1],
        ]);
        let mut a = IslipState::with_pointers(vec![2, 1, 0, 3], vec![1, 1, 2, 0]).unwrap();
        let mut b = a.clone();
        let ma = islip(&requests, &mut a, 2).unwrap();
        let mb = islip(&requests, &mut b, 2).unwrap();
        assert_eq!(ma, mb);
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_malformed_inputs() {
        let requests = RequestMatrix::new(4);
        let mut state = IslipState::new(3).unwrap();
        assert_eq!(
            islip(&requests, &mut state, 1),
            Err(SchedulerError::PortCountMismatch {
                requests: 4,
                state: 3
            })
        );
        let mut ok = IslipState::new(4).unwrap();
        assert_eq!(
            islip(&requests, &mut ok, 0),
            Err(SchedulerError::ZeroIterations)
        );
        assert!(IslipState::with_pointers(vec![0, 4], vec![0, 0]).is_err());
        assert!(IslipState::new(0).is_err());
        let mut matching = Matching::empty(2);
        matching.insert(0, 1).unwrap();
        assert_eq!(
            matching.insert(0, 0),
            Err(SchedulerError::ConflictingPair {
                input: 0,
                output: 0
            })
        );
        assert_eq!(
            matching.insert(1, 1),
            Err(SchedulerError::ConflictingPair {
                input: 1,
                output: 1
            })
        );
    }
}
