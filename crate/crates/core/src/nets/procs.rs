//! Transition procedures binding the canonical nets to the environment
//! services. Procedures mutate the kernel and the environment; the engine
//! moves the kernel.

use crate::enet::{AttrValue, Kernel, ProcedureContext, ProcedureError, ProcedureTable};
use crate::services::{
    AuditAction, Environment, Plaintext, SecuredMessage, ServiceError, TransportHandle,
};

use super::attr;

type Ctx<'a> = ProcedureContext<'a, Environment>;

fn svc(e: ServiceError) -> ProcedureError {
    ProcedureError::new(e.to_string())
}

fn kernel_user(kernel: &Kernel) -> Result<String, ProcedureError> {
    kernel
        .text(attr::USER)
        .filter(|u| !u.is_empty())
        .map(str::to_string)
        .ok_or_else(|| ProcedureError::new("kernel has no user"))
}

fn request_access(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    kernel_user(ctx.kernel)?;
    let ts = ctx.env.tick();
    ctx.kernel.set(attr::REQUESTED_AT, AttrValue::Int(ts as i64));
    Ok(())
}

fn verify_rights(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    let decision = ctx.env.authenticate(&user).map_err(svc)?;
    ctx.kernel
        .set(attr::GRANTED, AttrValue::Bool(decision.effective()));
    Ok(())
}

fn request_secmail(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    let available = ctx.env.request_secmail(&user).map_err(svc)?;
    ctx.kernel.set(attr::SECMAIL, AttrValue::Bool(available));
    Ok(())
}

fn log_session(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    ctx.env
        .audit_append(&user, AuditAction::SessionOpened, None, "session opened");
    Ok(())
}

/// SESSION_CLOSED only when the decision actually leaves the net.
fn exit_session(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    if ctx.target_terminal {
        let user = kernel_user(ctx.kernel)?;
        ctx.env
            .audit_append(&user, AuditAction::SessionClosed, None, "session closed");
    }
    Ok(())
}

fn recipients_of(kernel: &Kernel) -> Result<Vec<String>, ProcedureError> {
    let list = kernel
        .list(attr::RECIPIENTS)
        .ok_or_else(|| ProcedureError::new("kernel has no recipients"))?;
    list.iter()
        .map(|v| {
            v.as_text()
                .map(str::to_string)
                .ok_or_else(|| ProcedureError::new("recipient is not a user id"))
        })
        .collect()
}

/// Pops the next scripted message from the outbox into the current
/// recipients/plaintext attributes.
fn select_message(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let outbox = ctx
        .kernel
        .get(attr::OUTBOX)
        .and_then(AttrValue::as_list)
        .ok_or_else(|| ProcedureError::new("kernel has no outbox"))?;
    if outbox.is_empty() {
        return Err(ProcedureError::new("no scripted message to select"));
    }
    let entry = outbox[0].clone();
    let parts = entry
        .as_list()
        .filter(|p| p.len() == 4)
        .ok_or_else(|| ProcedureError::new("malformed outbox entry"))?;
    let recipients = parts[0]
        .as_list()
        .ok_or_else(|| ProcedureError::new("malformed outbox recipients"))?;
    if recipients.is_empty() {
        return Err(ProcedureError::new("empty recipients"));
    }
    let bytes = |v: &AttrValue, what: &str| -> Result<Vec<u8>, ProcedureError> {
        v.as_bytes()
            .map(<[u8]>::to_vec)
            .ok_or_else(|| ProcedureError::new(format!("malformed outbox {what}")))
    };
    let subject = bytes(&parts[1], "subject")?;
    let body = bytes(&parts[2], "body")?;
    let attachment = bytes(&parts[3], "attachment")?;

    ctx.kernel.set(attr::RECIPIENTS, AttrValue::List(recipients.to_vec()));
    ctx.kernel.set(attr::SUBJECT, AttrValue::Bytes(subject));
    ctx.kernel.set(attr::BODY, AttrValue::Bytes(body));
    ctx.kernel.set(attr::ATTACHMENT, AttrValue::Bytes(attachment));
    ctx.kernel
        .get(attr::OUTBOX)
        .cloned()
        .and_then(|v| match v {
            AttrValue::List(mut items) => {
                items.remove(0);
                ctx.kernel.set(attr::OUTBOX, AttrValue::List(items));
                Some(())
            }
            _ => None,
        })
        .expect("outbox checked above");
    Ok(())
}

fn log_selection(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    let recipients = recipients_of(ctx.kernel)?;
    ctx.env.audit_append(
        &user,
        AuditAction::RecipientsSelected,
        None,
        format!("to={}", recipients.join(",")),
    );
    Ok(())
}

fn plaintext_of(kernel: &Kernel) -> Result<Plaintext, ProcedureError> {
    let field = |name: &str| -> Result<Vec<u8>, ProcedureError> {
        kernel
            .get(name)
            .and_then(AttrValue::as_bytes)
            .map(<[u8]>::to_vec)
            .ok_or_else(|| ProcedureError::new(format!("kernel has no {name}")))
    };
    Ok(Plaintext {
        subject: field(attr::SUBJECT)?,
        body: field(attr::BODY)?,
        attachment: field(attr::ATTACHMENT)?,
    })
}

fn sealed_messages(kernel: &Kernel) -> Result<Vec<SecuredMessage>, ProcedureError> {
    let list = kernel
        .list(attr::SEALED)
        .ok_or_else(|| ProcedureError::new("kernel has no sealed messages"))?;
    list.iter()
        .map(|v| {
            v.as_bytes()
                .and_then(SecuredMessage::from_bytes)
                .ok_or_else(|| ProcedureError::new("malformed sealed message"))
        })
        .collect()
}

/// Seals the current plaintext once per recipient; the resulting secured
/// messages travel in the kernel until archived and sent.
fn cipher_message(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    let recipients = recipients_of(ctx.kernel)?;
    let plain = plaintext_of(ctx.kernel)?;
    let mut sealed = Vec::new();
    let mut first_no = None;
    for recipient in &recipients {
        let msg = ctx.env.seal(&user, recipient, &plain).map_err(svc)?;
        if first_no.is_none() {
            first_no = Some(msg.message_no);
        }
        sealed.push(AttrValue::Bytes(msg.to_bytes()));
    }
    ctx.kernel.set(attr::SEALED, AttrValue::List(sealed));
    ctx.kernel.set(
        attr::MESSAGE_NO,
        AttrValue::Int(first_no.expect("recipients non-empty") as i64),
    );
    Ok(())
}

fn archive_message(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    for msg in sealed_messages(ctx.kernel)? {
        ctx.env.archive_store(msg);
    }
    Ok(())
}

fn log_archive(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    for msg in sealed_messages(ctx.kernel)? {
        ctx.env.audit_append(
            &user,
            AuditAction::MessageArchived,
            Some(msg.message_no),
            format!("to={}", msg.recipient),
        );
    }
    Ok(())
}

fn send_message(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    let sealed = sealed_messages(ctx.kernel)?;
    let sent = sealed.len() as i64;
    for msg in sealed {
        let no = msg.message_no;
        let recipient = msg.recipient.clone();
        ctx.env.transport_send(msg);
        ctx.env.audit_append(
            &user,
            AuditAction::MessageSent,
            Some(no),
            format!("to={recipient}"),
        );
    }
    let count = ctx.kernel.int(attr::SENT_COUNT).unwrap_or(0);
    ctx.kernel.set(attr::SENT_COUNT, AttrValue::Int(count + sent));
    ctx.kernel.set(attr::SEALED, AttrValue::List(Vec::new()));
    ctx.kernel.remove(attr::SUBJECT);
    ctx.kernel.remove(attr::BODY);
    ctx.kernel.remove(attr::ATTACHMENT);
    ctx.kernel.set(attr::RECIPIENTS, AttrValue::List(Vec::new()));
    Ok(())
}

/// The loop-pass aggregate: select, log selection, cipher, archive, log
/// archive. Only two transitions exist on the loop path, so the detailed
/// pipeline collapses into this one and the follow-up send.
fn prepare_followup(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    select_message(ctx)?;
    log_selection(ctx)?;
    cipher_message(ctx)?;
    archive_message(ctx)?;
    log_archive(ctx)
}

fn poll_mailbox(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    let handles = ctx.env.transport_poll(&user);
    let mut pending = ctx
        .kernel
        .list(attr::PENDING)
        .map(<[AttrValue]>::to_vec)
        .unwrap_or_default();
    pending.extend(
        handles
            .into_iter()
            .map(|h| AttrValue::Int(h.0 as i64)),
    );
    ctx.kernel.set(attr::PENDING, AttrValue::List(pending));
    Ok(())
}

/// Pops the next pending handle, if any; with nothing pending the pass is a
/// no-op and the kernel drains through to the exit decision.
fn select_pending(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let mut pending = ctx
        .kernel
        .list(attr::PENDING)
        .map(<[AttrValue]>::to_vec)
        .ok_or_else(|| ProcedureError::new("kernel has no pending list"))?;
    if pending.is_empty() {
        ctx.kernel.remove(attr::CURRENT);
        return Ok(());
    }
    let head = pending.remove(0);
    let handle = head
        .as_int()
        .ok_or_else(|| ProcedureError::new("malformed pending handle"))?;
    ctx.kernel.set(attr::CURRENT, AttrValue::Int(handle));
    ctx.kernel.set(attr::PENDING, AttrValue::List(pending));
    Ok(())
}

/// Fetches and verifies the selected message. Verification failure does not
/// stop the session: the kernel proceeds with last_error set and the
/// rejection audited.
fn receive_secured(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    let Some(handle) = ctx.kernel.int(attr::CURRENT) else {
        return Ok(());
    };
    let msg = ctx
        .env
        .transport_fetch(TransportHandle(handle as u64))
        .map_err(svc)?
        .clone();
    ctx.kernel
        .set(attr::RECEIVED_NO, AttrValue::Int(msg.message_no as i64));
    ctx.kernel
        .set(attr::RECEIVED_FROM, AttrValue::Text(msg.sender.clone()));
    match ctx.env.open(&msg) {
        Ok(plain) => {
            ctx.kernel.set(attr::SUBJECT, AttrValue::Bytes(plain.subject));
            ctx.kernel.set(attr::BODY, AttrValue::Bytes(plain.body));
            ctx.kernel
                .set(attr::ATTACHMENT, AttrValue::Bytes(plain.attachment));
            ctx.kernel.remove(attr::LAST_ERROR);
        }
        Err(ServiceError::Verify(e)) => {
            let code = e.to_string();
            ctx.kernel
                .set(attr::LAST_ERROR, AttrValue::Text(code.clone()));
            ctx.env.audit_append(
                &user,
                AuditAction::MessageRejected,
                Some(msg.message_no),
                format!("from={} err={code}", msg.sender),
            );
        }
        Err(other) => return Err(svc(other)),
    }
    let processed = ctx.kernel.int(attr::PROCESSED).unwrap_or(0);
    ctx.kernel.set(attr::PROCESSED, AttrValue::Int(processed + 1));
    ctx.kernel.remove(attr::CURRENT);
    Ok(())
}

/// Audits MESSAGE_PROCESSED for a successful pass; rejected passes were
/// already audited by the receive step.
fn log_processed(ctx: &mut Ctx) -> Result<(), ProcedureError> {
    let user = kernel_user(ctx.kernel)?;
    if let Some(no) = ctx.kernel.int(attr::RECEIVED_NO) {
        if ctx.kernel.get(attr::LAST_ERROR).is_none() {
            let from = ctx
                .kernel
                .text(attr::RECEIVED_FROM)
                .unwrap_or_default()
                .to_string();
            ctx.env.audit_append(
                &user,
                AuditAction::MessageProcessed,
                Some(no as u64),
                format!("from={from}"),
            );
        }
        ctx.kernel.remove(attr::RECEIVED_NO);
        ctx.kernel.remove(attr::RECEIVED_FROM);
    }
    Ok(())
}

/// Every procedure the canonical nets reference, by name.
pub fn procedures() -> ProcedureTable<Environment> {
    let mut t = ProcedureTable::new();
    t.register("ens.request_access", request_access);
    t.register("ens.verify_rights", verify_rights);
    t.register("ens.request_secmail", request_secmail);
    t.register("ens.log_session", log_session);
    t.register("ens.select_recipients", select_message);
    t.register("ens.log_selection", log_selection);
    t.register("ens.cipher", cipher_message);
    t.register("ens.archive", archive_message);
    t.register("ens.log_archive", log_archive);
    t.register("ens.send", send_message);
    t.register("ens.exit", exit_session);
    t.register("ens.prepare_followup", prepare_followup);
    t.register("ens.send_followup", send_message);
    t.register("enr.request_access", request_access);
    t.register("enr.verify_rights", verify_rights);
    t.register("enr.poll_mailbox", poll_mailbox);
    t.register("enr.request_secmail", request_secmail);
    t.register("enr.log_session", log_session);
    t.register("enr.select_first", select_pending);
    t.register("enr.select_next", select_pending);
    t.register("enr.receive_secured", receive_secured);
    t.register("enr.log_processed", log_processed);
    t.register("enr.exit", exit_session);
    t
}
