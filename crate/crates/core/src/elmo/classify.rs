use super::{DocumentType, ElmoDocument, ElmoError, LosType};

/// Classifies a document by the shape of its learning opportunity tree.
///
/// Transcript: some Course or Module node at any depth carries a grade or
/// credits. Certificate: exactly one top-level node, of type Diploma or
/// Degree Programme, EQF level absent or at most 4, and no descendant with
/// a grade or credits. The transcript rule is checked first.
pub fn detect_document_type(doc: &ElmoDocument) -> Result<DocumentType, ElmoError> {
    let all = doc.all_learning_opportunities();
    let transcript = all.iter().any(|los| {
        matches!(los.kind(), Some(LosType::Course) | Some(LosType::Module))
            && los.result.carries_outcome()
    });
    if transcript {
        return Ok(DocumentType::TranscriptOfRecords);
    }

    if let [top] = doc.reports.as_slice() {
        let shape = matches!(
            top.kind(),
            Some(LosType::Diploma) | Some(LosType::DegreeProgramme)
        );
        let level_ok = match top.eqf_value() {
            None => true,
            Some(Ok(n)) => n <= 4,
            Some(Err(_)) => false,
        };
        let descendants_clear = top
            .walk()
            .iter()
            .skip(1)
            .all(|los| !los.result.carries_outcome());
        if shape && level_ok && descendants_clear {
            return Ok(DocumentType::UpperSecondarySchoolCertificate);
        }
    }
    Err(ElmoError::UnclassifiableDocument)
}
