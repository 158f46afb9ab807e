//! Synchronous, lossless broadcast channel.
//!
//! A round is opened with the list of expected senders. Nothing is delivered
//! until every expected sender has posted, and delivery is in the order of
//! that list, so every receiver sees the same sequence.

use thiserror::Error;

use crate::identity::Identity;
use crate::protocol::WireMessage;

use super::transcript::RoundLabel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("no round is open")]
    NoOpenRound,
    #[error("round {0:?} is still open")]
    RoundAlreadyOpen(RoundLabel),
    #[error("{0} is not expected to broadcast in this round")]
    UnexpectedSender(Identity),
    #[error("{0} already broadcast in this round")]
    DuplicateBroadcast(Identity),
    #[error("round incomplete, still waiting for {0:?}")]
    RoundIncomplete(Vec<Identity>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeliveredRound {
    pub label: RoundLabel,
    pub messages: Vec<WireMessage>,
}

#[derive(Debug)]
struct OpenRound {
    label: RoundLabel,
    senders: Vec<Identity>,
    slots: Vec<Option<WireMessage>>,
}

#[derive(Debug, Default)]
pub struct BroadcastBus {
    log: Vec<DeliveredRound>,
    open: Option<OpenRound>,
}

impl BroadcastBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn open_round(
        &mut self,
        label: RoundLabel,
        senders: Vec<Identity>,
    ) -> Result<(), BusError> {
        if let Some(open) = &self.open {
            return Err(BusError::RoundAlreadyOpen(open.label));
        }
        let slots = vec![None; senders.len()];
        self.open = Some(OpenRound {
            label,
            senders,
            slots,
        });
        Ok(())
    }

    pub fn broadcast(&mut self, msg: WireMessage) -> Result<(), BusError> {
        let open = self.open.as_mut().ok_or(BusError::NoOpenRound)?;
        let sender = msg.identity();
        let pos = open
            .senders
            .iter()
            .position(|s| s == sender)
            .ok_or_else(|| BusError::UnexpectedSender(sender.clone()))?;
        if open.slots[pos].is_some() {
            return Err(BusError::DuplicateBroadcast(sender.clone()));
        }
        open.slots[pos] = Some(msg);
        Ok(())
    }

    /// Closes the round and hands every receiver the same ordered list.
    pub fn deliver(&mut self) -> Result<Vec<WireMessage>, BusError> {
        let open = self.open.as_ref().ok_or(BusError::NoOpenRound)?;
        let missing: Vec<Identity> = open
            .senders
            .iter()
            .zip(&open.slots)
            .filter(|(_, slot)| slot.is_none())
            .map(|(id, _)| id.clone())
            .collect();
        if !missing.is_empty() {
            return Err(BusError::RoundIncomplete(missing));
        }
        let open = self.open.take().expect("checked above");
        let messages: Vec<WireMessage> = open
            .slots
            .into_iter()
            .map(|m| m.expect("complete"))
            .collect();
        self.log.push(DeliveredRound {
            label: open.label,
            messages: messages.clone(),
        });
        Ok(messages)
    }

    pub fn log(&self) -> &[DeliveredRound] {
        &self.log
    }

    pub fn into_log(self) -> Vec<DeliveredRound> {
        self.log
    }
}
