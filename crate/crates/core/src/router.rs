//! Router datapath: packets, buffer organisation, and virtual output queues.
//!
//! Packets are keyed by input and output port. Both buffer organisations
//! store them in per-(input, output) virtual output queues so head-of-line
//! blocking never hides a schedulable packet; the organisations differ only
//! in which pool a packet's slot is charged to. A full pool drops the
//! arriving packet, it is never queued elsewhere.
//!
//! Every admission is tagged with a global sequence number and indexed in
//! its pool's order map, so pool-wide FIFO service (used by the queueing
//! model) and per-VOQ service (used by the crossbar scheduler) stay
//! consistent views of the same state.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::scheduler::{Matching, RequestMatrix};

/// Ports on the reference router.
pub const DEFAULT_PORTS: usize = 4;
/// Per-input buffer slots in the distributed organisation.
pub const DEFAULT_DISTRIBUTED_CAPACITY: usize = 32;
/// Pooled buffer slots in the common organisation.
pub const DEFAULT_COMMON_CAPACITY: usize = 128;

#[derive(Debug, Error, PartialEq)]
pub enum RouterError {
    #[error("port count must be at least 1, got {0}")]
    InvalidPortCount(usize),
    #[error("buffer capacity must be at least 1, got {0}")]
    InvalidCapacity(usize),
    #[error("packet addresses port ({input}, {output}) on a {ports}-port router")]
    PortOutOfRange {
        input: usize,
        output: usize,
        ports: usize,
    },
    #[error("matching retires from empty queue ({input}, {output})")]
    RetireFromEmptyQueue { input: usize, output: usize },
    #[error("pool index {pool} out of range for {pools} pools")]
    PoolOutOfRange { pool: usize, pools: usize },
}

/// One packet traversing the router. Timestamps are in the owning
/// simulation's time unit: seconds under the queueing model, cycles under
/// the crossbar model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub input_port: usize,
    pub output_port: usize,
    /// When the packet was offered to the router.
    pub created_at: f64,
    /// When it was admitted to a buffer; equals `created_at` until the
    /// buffer sets it.
    pub enqueued_at: f64,
    /// When service completed; `None` while resident.
    pub departed_at: Option<f64>,
}

impl Packet {
    pub fn new(id: u64, input_port: usize, output_port: usize, created_at: f64) -> Self {
        Packet {
            id,
            input_port,
            output_port,
            created_at,
            enqueued_at: created_at,
            departed_at: None,
        }
    }

    /// Time from offering to service completion, if served.
    pub fn latency(&self) -> Option<f64> {
        self.departed_at.map(|d| d - self.created_at)
    }
}

/// Monotone packet identifier allocator shared by all sources of a run.
#[derive(Debug, Default, Clone)]
pub struct PacketIdGen {
    next: u64,
}

impl PacketIdGen {
    pub fn new() -> Self {
        PacketIdGen { next: 0 }
    }

    pub fn allocate(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }

    /// Identifiers handed out so far.
    pub fn issued(&self) -> u64 {
        self.next
    }
}

/// How buffer slots are owned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferArchitecture {
    /// One pool shared by every input port.
    Common { pool_capacity: usize },
    /// One private pool per input port.
    Distributed { per_input_capacity: usize },
}

impl BufferArchitecture {
    pub fn common_default() -> Self {
        BufferArchitecture::Common {
            pool_capacity: DEFAULT_COMMON_CAPACITY,
        }
    }

    pub fn distributed_default() -> Self {
        BufferArchitecture::Distributed {
            per_input_capacity: DEFAULT_DISTRIBUTED_CAPACITY,
        }
    }

    pub fn validate(&self) -> Result<(), RouterError> {
        let capacity = match *self {
            BufferArchitecture::Common { pool_capacity } => pool_capacity,
            BufferArchitecture::Distributed { per_input_capacity } => per_input_capacity,
        };
        if capacity == 0 {
            return Err(RouterError::InvalidCapacity(capacity));
        }
        Ok(())
    }

    /// Number of independent pools on a `ports`-port router.
    pub fn pool_count(&self, ports: usize) -> usize {
        match self {
            BufferArchitecture::Common { .. } => 1,
            BufferArchitecture::Distributed { .. } => ports,
        }
    }

    /// Pool charged for a packet entering at `input`.
    pub fn pool_of_input(&self, input: usize) -> usize {
        match self {
            BufferArchitecture::Common { .. } => 0,
            BufferArchitecture::Distributed { .. } => input,
        }
    }

    /// Slot budget of one pool.
    pub fn pool_capacity(&self) -> usize {
        match *self {
            BufferArchitecture::Common { pool_capacity } => pool_capacity,
            BufferArchitecture::Distributed { per_input_capacity } => per_input_capacity,
        }
    }
}

/// Outcome of offering a packet to the buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admitted,
    Blocked,
}

/// Buffered packets of one router, organised as `ports * ports` virtual
/// output queues with per-pool occupancy accounting.
#[derive(Debug, Clone)]
pub struct BufferState {
    ports: usize,
    arch: BufferArchitecture,
    /// VOQ for `(input, output)` at index `input * ports + output`; each
    /// entry carries the admission sequence number.
    queues: Vec<VecDeque<(Packet, u64)>>,
    /// Per pool: admission sequence -> (input, output), the pool-wide FIFO.
    pool_order: Vec<BTreeMap<u64, (usize, usize)>>,
    occupancy: Vec<usize>,
    admissions: u64,
}

impl BufferState {
    pub fn new(ports: usize, arch: BufferArchitecture) -> Result<Self, RouterError> {
        if ports == 0 {
            return Err(RouterError::InvalidPortCount(ports));
        }
        arch.validate()?;
        let pools = arch.pool_count(ports);
        Ok(BufferState {
            ports,
            arch,
            queues: vec![VecDeque::new(); ports * ports],
            pool_order: vec![BTreeMap::new(); pools],
            occupancy: vec![0; pools],
            admissions: 0,
        })
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    pub fn architecture(&self) -> BufferArchitecture {
        self.arch
    }

    pub fn pool_count(&self) -> usize {
        self.occupancy.len()
    }

    pub fn pool_capacity(&self) -> usize {
        self.arch.pool_capacity()
    }

    pub fn pool_of_input(&self, input: usize) -> usize {
        self.arch.pool_of_input(input)
    }

    pub fn pool_occupancy(&self, pool: usize) -> Result<usize, RouterError> {
        self.occupancy
            .get(pool)
            .copied()
            .ok_or(RouterError::PoolOutOfRange {
                pool,
                pools: self.occupancy.len(),
            })
    }

    pub fn total_occupancy(&self) -> usize {
        self.occupancy.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total_occupancy() == 0
    }

    fn queue_index(&self, input: usize, output: usize) -> usize {
        input * self.ports + output
    }

    /// Offers a packet. On admission the packet is stamped with `now` and
    /// stored; on a full governing pool it is dropped and `Blocked` is
    /// returned, leaving all state untouched.
    pub fn try_enqueue(&mut self, mut packet: Packet, now: f64) -> Result<Admission, RouterError> {
        if packet.input_port >= self.ports || packet.output_port >= self.ports {
            return Err(RouterError::PortOutOfRange {
                input: packet.input_port,
                output: packet.output_port,
                ports: self.ports,
            });
        }
        let pool = self.arch.pool_of_input(packet.input_port);
        if self.occupancy[pool] >= self.arch.pool_capacity() {
            return Ok(Admission::Blocked);
        }
        packet.enqueued_at = now;
        let seq = self.admissions;
        self.admissions += 1;
        let key = (packet.input_port, packet.output_port);
        let index = self.queue_index(packet.input_port, packet.output_port);
        self.queues[index].push_back((packet, seq));
        self.pool_order[pool].insert(seq, key);
        self.occupancy[pool] += 1;
        Ok(Admission::Admitted)
    }

    /// Identifier of the pool's oldest resident packet.
    pub fn pool_head_id(&self, pool: usize) -> Result<Option<u64>, RouterError> {
        let order = self
            .pool_order
            .get(pool)
            .ok_or(RouterError::PoolOutOfRange {
                pool,
                pools: self.pool_order.len(),
            })?;
        Ok(order.iter().next().map(|(_, &(input, output))| {
            let index = input * self.ports + output;
            self.queues[index]
                .front()
                .expect("pool order references an empty queue")
                .0
                .id
        }))
    }

    /// Removes and returns the pool's oldest packet, stamped with its
    /// departure time. Pool-wide FIFO: admission order decides, not the
    /// VOQ the packet sits in.
    pub fn pop_pool_head(
        &mut self,
        pool: usize,
        departed_at: f64,
    ) -> Result<Option<Packet>, RouterError> {
        let pools = self.pool_order.len();
        let order = self
            .pool_order
            .get_mut(pool)
            .ok_or(RouterError::PoolOutOfRange { pool, pools })?;
        let Some((seq, (input, output))) = order.pop_first() else {
            return Ok(None);
        };
        let index = input * self.ports + output;
        let (mut packet, head_seq) = self.queues[index]
            .pop_front()
            .expect("pool order references an empty queue");
        debug_assert_eq!(seq, head_seq, "VOQ head out of step with pool order");
        packet.departed_at = Some(departed_at);
        self.occupancy[pool] -= 1;
        Ok(Some(packet))
    }

    /// One row per input, one column per output; set wherever the VOQ is
    /// non-empty. This is the demand the crossbar scheduler sees.
    pub fn request_matrix(&self) -> RequestMatrix {
        let mut requests = RequestMatrix::new(self.ports);
        for input in 0..self.ports {
            for output in 0..self.ports {
                if !self.queues[self.queue_index(input, output)].is_empty() {
                    requests.set(input, output);
                }
            }
        }
        requests
    }

    /// Dequeues the head of every matched VOQ, stamping each with
    /// `departed_at`. A matched pair whose VOQ is empty is an error: the
    /// scheduler contract only grants requests, and requests only exist
    /// for non-empty queues.
    pub fn retire(
        &mut self,
        matching: &Matching,
        departed_at: f64,
    ) -> Result<Vec<Packet>, RouterError> {
        let mut departed = Vec::with_capacity(matching.len());
        for (input, output) in matching.pairs() {
            let index = self.queue_index(input, output);
            let Some((mut packet, seq)) = self.queues[index].pop_front() else {
                return Err(RouterError::RetireFromEmptyQueue { input, output });
            };
            let pool = self.arch.pool_of_input(input);
            let removed = self.pool_order[pool].remove(&seq);
            debug_assert!(removed.is_some(), "admitted packet missing from pool order");
            packet.departed_at = Some(departed_at);
            self.occupancy[pool] -= 1;
            departed.push(packet);
        }
        Ok(departed)
    }

    /// Recomputes occupancy from the queues and checks every cross-index.
    /// Cheap enough to run periodically inside long simulations.
    pub fn check_consistency(&self) -> bool {
        let mut counted = vec![0usize; self.pool_count()];
        for input in 0..self.ports {
            for output in 0..self.ports {
                let len = self.queues[self.queue_index(input, output)].len();
                counted[self.arch.pool_of_input(input)] += len;
            }
        }
        let order_sizes: Vec<usize> = self.pool_order.iter().map(|m| m.len()).collect();
        counted == self.occupancy && order_sizes == self.occupancy
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::Matching;

    fn packet(id: u64, input: usize, output: usize, at: f64) -> Packet {
        Packet::new(id, input, output, at)
    }

    #[test]
    fn common_pool_admits_across_inputs_until_full() {
        let mut buffer = BufferState::new(4, BufferArchitecture::Common { pool_capacity: 3 })
            .expect("valid buffer");
        for id in 0..3 {
            let p = packet(id, (id as usize) % 4, 0, id as f64);
            assert_eq!(buffer.try_enqueue(p, id as f64).unwrap(), Admission::Admitted);
        }
        let overflow = packet(3, 3, 0, 3.0);
        assert_eq!(
            buffer.try_enqueue(overflow, 3.0).unwrap(),
            Admission::Blocked
        );
        assert_eq!(buffer.total_occupancy(), 3);
        assert!(buffer.check_consistency());
    }

    #[test]
    fn distributed_pools_block_independently() {
        let mut buffer = BufferState::new(
            4,
            BufferArchitecture::Distributed {
                per_input_capacity: 1,
            },
        )
        .expect("valid buffer");
        assert_eq!(
            buffer.try_enqueue(packet(0, 0, 1, 0.0), 0.0).unwrap(),
            Admission::Admitted
        );
        // Input 0 is full; input 1 still has room.
        assert_eq!(
            buffer.try_enqueue(packet(1, 0, 2, 0.1), 0.1).unwrap(),
            Admission::Blocked
        );
        assert_eq!(
            buffer.try_enqueue(packet(2, 1, 2, 0.2), 0.2).unwrap(),
            Admission::Admitted
        );
        assert_eq!(buffer.pool_occupancy(0).unwrap(), 1);
        assert_eq!(buffer.pool_occupancy(1).unwrap(), 1);
    }

    #[test]
    fn blocked_packet_leaves_no_trace() {
        let mut buffer =
            BufferState::new(2, BufferArchitecture::Common { pool_capacity: 1 }).unwrap();
        buffer.try_enqueue(packet(0, 0, 0, 0.0), 0.0).unwrap();
        let before = buffer.clone();
        buffer.try_enqueue(packet(1, 1, 1, 0.5), 0.5).unwrap();
        assert_eq!(buffer.total_occupancy(), before.total_occupancy());
        assert_eq!(buffer.request_matrix(), before.request_matrix());
        assert!(buffer.check_consistency());
    }

    #[test]
    fn pool_fifo_crosses_voq_boundaries() {
        // Three packets into one common pool via different VOQs must come
        // back in admission order.
        let mut buffer =
            BufferState::new(4, BufferArchitecture::Common { pool_capacity: 128 }).unwrap();
        buffer.try_enqueue(packet(10, 0, 3, 0.0), 0.0).unwrap();
        buffer.try_enqueue(packet(11, 2, 1, 1.0), 1.0).unwrap();
        buffer.try_enqueue(packet(12, 0, 3, 2.0), 2.0).unwrap();
        assert_eq!(buffer.pool_head_id(0).unwrap(), Some(10));
        let first = buffer.pop_pool_head(0, 3.0).unwrap().unwrap();
        let second = buffer.pop_pool_head(0, 4.0).unwrap().unwrap();
        let third = buffer.pop_pool_head(0, 5.0).unwrap().unwrap();
        assert_eq!(
            (first.id, second.id, third.id),
            (10, 11, 12),
            "service must follow admission order"
        );
        assert_eq!(first.departed_at, Some(3.0));
        assert!(buffer.is_empty());
        assert_eq!(buffer.pop_pool_head(0, 6.0).unwrap(), None);
    }

    #[test]
    fn enqueue_stamps_admission_time() {
        let mut buffer =
            BufferState::new(2, BufferArchitecture::Common { pool_capacity: 2 }).unwrap();
        let p = packet(0, 0, 1, 1.5);
        buffer.try_enqueue(p, 2.5).unwrap();
        let out = buffer.pop_pool_head(0, 9.0).unwrap().unwrap();
        assert_eq!(out.created_at, 1.5);
        assert_eq!(out.enqueued_at, 2.5);
        assert_eq!(out.latency(), Some(7.5));
    }

    #[test]
    fn request_matrix_mirrors_nonempty_voqs() {
        let mut buffer = BufferState::new(4, BufferArchitecture::distributed_default()).unwrap();
        buffer.try_enqueue(packet(0, 1, 2, 0.0), 0.0).unwrap();
        buffer.try_enqueue(packet(1, 3, 0, 0.0), 0.0).unwrap();
        buffer.try_enqueue(packet(2, 3, 0, 0.0), 0.0).unwrap();
        let requests = buffer.request_matrix();
        for input in 0..4 {
            for output in 0..4 {
                let expected = (input, output) == (1, 2) || (input, output) == (3, 0);
                assert_eq!(requests.get(input, output), expected);
            }
        }
    }

    #[test]
    fn retire_dequeues_matched_heads_in_fifo_order() {
        let mut buffer = BufferState::new(4, BufferArchitecture::distributed_default()).unwrap();
        buffer.try_enqueue(packet(0, 1, 2, 0.0), 0.0).unwrap();
        buffer.try_enqueue(packet(1, 1, 2, 1.0), 1.0).unwrap();
        buffer.try_enqueue(packet(2, 0, 3, 1.0), 1.0).unwrap();
        let mut matching = Matching::empty(4);
        matching.insert(1, 2).unwrap();
        matching.insert(0, 3).unwrap();
        let departed = buffer.retire(&matching, 10.0).unwrap();
        let ids: Vec<u64> = departed.iter().map(|p| p.id).collect();
        // Pairs come back ordered by input port: (0,3) then (1,2).
        assert_eq!(ids, vec![2, 0], "VOQ heads only, input order");
        assert!(departed.iter().all(|p| p.departed_at == Some(10.0)));
        assert_eq!(buffer.total_occupancy(), 1);
        assert!(buffer.check_consistency());
    }

    #[test]
    fn retire_from_empty_voq_is_an_error() {
        let mut buffer = BufferState::new(4, BufferArchitecture::distributed_default()).unwrap();
        let mut matching = Matching::empty(4);
        matching.insert(2, 2).unwrap();
        assert_eq!(
            buffer.retire(&matching, 1.0),
            Err(RouterError::RetireFromEmptyQueue {
                input: 2,
                output: 2
            })
        );
    }

    #[test]
    fn rejects_out_of_range_ports() {
        let mut buffer = BufferState::new(4, BufferArchitecture::common_default()).unwrap();
        assert!(matches!(
            buffer.try_enqueue(packet(0, 4, 0, 0.0), 0.0),
            Err(RouterError::PortOutOfRange { .. })
        ));
        assert!(matches!(
            buffer.try_enqueue(packet(0, 0, 7, 0.0), 0.0),
            Err(RouterError::PortOutOfRange { .. })
        ));
        assert!(BufferState::new(0, BufferArchitecture::common_default()).is_err());
        assert!(BufferState::new(4, BufferArchitecture::Common { pool_capacity: 0 }).is_err());
    }

    #[test]
    fn default_geometries_match_the_reference_router() {
        let common = BufferState::new(DEFAULT_PORTS, BufferArchitecture::common_default()).unwrap();
        assert_eq!(common.pool_count(), 1);
        assert_eq!(common.pool_capacity(), 128);
        let distributed =
            BufferState::new(DEFAULT_PORTS, BufferArchitecture::distributed_default()).unwrap();
        assert_eq!(distributed.pool_count(), 4);
        assert_eq!(distributed.pool_capacity(), 32);
        // Same total slot budget either way.
        assert_eq!(
            common.pool_capacity(),
            distributed.pool_capacity() * DEFAULT_PORTS
        );
    }
}
