//! Clinical-style sentence templates and the sentence pools built from them.
//!
//! A template is a space-separated token string in which `{name}` marks a
//! slot. Slots are filled from [`TemplateGrammar::slots`]; carrier templates
//! additionally contain a `{kw}` slot that receives a keyword filler.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::keywords::KeywordSets;
use crate::error::{Error, Result};

pub const MIN_SENTENCE_LEN: usize = 3;
pub const MAX_SENTENCE_LEN: usize = 15;

const KEYWORD_SLOT: &str = "kw";

/// How a carrier sentence relates to its keyword.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Affirmed,
    /// Negated in a way the rule detector recognizes.
    Negated,
    /// Negated in a way the rule detector misses (trigger after the keyword,
    /// too far away, or behind a scope breaker).
    NegatedOutOfScope,
}

impl Polarity {
    pub fn is_negated(self) -> bool {
        self != Polarity::Affirmed
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarrierTemplate {
    pub text: String,
    pub polarity: Polarity,
}

#[derive(Debug, Clone)]
pub struct TemplateGrammar {
    /// Slot name to fillers; a filler may span several tokens.
    pub slots: BTreeMap<String, Vec<String>>,
    pub distractor_templates: Vec<String>,
    pub carrier_templates: Vec<CarrierTemplate>,
    /// Text placed in the `{kw}` slot of infection sentences. Every filler
    /// mentions at least one infection keyword.
    pub infection_fillers: Vec<String>,
    /// Target number of distinct distractor sentences.
    pub distractor_target: usize,
    /// Target number of distinct sentences per (keyword group, polarity).
    pub carrier_target: usize,
}

/// Carrier sentences of one keyword group, split by polarity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CarrierPool {
    pub affirmed: Vec<Vec<String>>,
    pub negated: Vec<Vec<String>>,
    pub negated_out_of_scope: Vec<Vec<String>>,
}

impl CarrierPool {
    pub fn get(&self, polarity: Polarity) -> &[Vec<String>] {
        match polarity {
            Polarity::Affirmed => &self.affirmed,
            Polarity::Negated => &self.negated,
            Polarity::NegatedOutOfScope => &self.negated_out_of_scope,
        }
    }

    fn get_mut(&mut self, polarity: Polarity) -> &mut Vec<Vec<String>> {
        match polarity {
            Polarity::Affirmed => &mut self.affirmed,
            Polarity::Negated => &mut self.negated,
            Polarity::NegatedOutOfScope => &mut self.negated_out_of_scope,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<String>, Polarity)> {
        self.affirmed
            .iter()
            .map(|s| (s, Polarity::Affirmed))
            .chain(self.negated.iter().map(|s| (s, Polarity::Negated)))
            .chain(
                self.negated_out_of_scope
                    .iter()
                    .map(|s| (s, Polarity::NegatedOutOfScope)),
            )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentencePool {
    pub infection_sentences: CarrierPool,
    /// One pool per inflammation group, in keyword-set order.
    pub inflammation_sentences: Vec<CarrierPool>,
    pub other_sentences: Vec<Vec<String>>,
}

fn slot_name(token: &str) -> Option<&str> {
    token.strip_prefix('{').and_then(|t| t.strip_suffix('}'))
}

impl TemplateGrammar {
    fn filler_len_range(&self, slot: &str, keyword_fillers: &[String]) -> Option<(usize, usize)> {
        let fillers = if slot == KEYWORD_SLOT {
            keyword_fillers
        } else {
            self.slots.get(slot)?.as_slice()
        };
        let lens = fillers.iter().map(|f| f.split_whitespace().count());
        Some((lens.clone().min()?, lens.max()?))
    }

    /// Validates that `template` can produce a sentence within the length
    /// bounds and that all of its slots exist.
    fn check_template(&self, template: &str, keyword_fillers: &[String]) -> Result<()> {
        let (mut lo, mut hi) = (0, 0);
        for token in template.split_whitespace() {
            match slot_name(token) {
                Some(slot) => {
                    let (a, b) = self
                        .filler_len_range(slot, keyword_fillers)
                        .ok_or_else(|| {
                            Error::Generation(format!(
                                "template '{template}' uses unknown or empty slot '{slot}'"
                            ))
                        })?;
                    lo += a;
                    hi += b;
                }
                None => {
                    lo += 1;
                    hi += 1;
                }
            }
        }
        if hi < MIN_SENTENCE_LEN || lo > MAX_SENTENCE_LEN {
            return Err(Error::Generation(format!(
                "template '{template}' cannot fit {MIN_SENTENCE_LEN}-{MAX_SENTENCE_LEN} tokens \
                 (produces {lo}-{hi})"
            )));
        }
        Ok(())
    }

    fn fill<R: Rng>(&self, template: &str, keyword_fillers: &[String], rng: &mut R) -> Vec<String> {
        let mut out = Vec::new();
        for token in template.split_whitespace() {
            match slot_name(token) {
                Some(slot) => {
                    let fillers = if slot == KEYWORD_SLOT {
                        keyword_fillers
                    } else {
                        &self.slots[slot]
                    };
                    let filler = fillers.choose(rng).expect("slot checked non-empty");
                    out.extend(filler.split_whitespace().map(str::to_owned));
                }
                None => out.push(token.to_owned()),
            }
        }
        out
    }

    fn carriers_with(&self, polarity: Polarity) -> Vec<&str> {
        self.carrier_templates
            .iter()
            .filter(|c| c.polarity == polarity)
            .map(|c| c.text.as_str())
            .collect()
    }

    /// All tokens a slot filler can produce (the noise vocabulary).
    pub fn noise_vocabulary(&self) -> HashSet<&str> {
        self.slots
            .values()
            .flatten()
            .flat_map(|f| f.split_whitespace())
            .collect()
    }
}

fn within_bounds(sentence: &[String]) -> bool {
    (MIN_SENTENCE_LEN..=MAX_SENTENCE_LEN).contains(&sentence.len())
}

/// Builds deduplicated sentence pools from the grammar.
///
/// Distractor sentences that happen to contain a keyword phrase are
/// discarded. Carrier pools are filled per keyword group and polarity, so
/// callers control the negation rate at sampling time.
pub fn build_sentence_pool(
    keyword_sets: &KeywordSets,
    grammar: &TemplateGrammar,
    rng_seed: u64,
) -> Result<SentencePool> {
    keyword_sets.validate().map_err(Error::Generation)?;
    if grammar.distractor_templates.len() < 20 {
        return Err(Error::Generation(format!(
            "need at least 20 distractor templates, got {}",
            grammar.distractor_templates.len()
        )));
    }
    let negated = grammar
        .carrier_templates
        .iter()
        .filter(|c| c.polarity.is_negated())
        .count();
    if grammar.carrier_templates.len() < 5 {
        return Err(Error::Generation(format!(
            "need at least 5 carrier templates, got {}",
            grammar.carrier_templates.len()
        )));
    }
    if negated * 4 < grammar.carrier_templates.len() {
        return Err(Error::Generation(
            "at least 25% of carrier templates must be negated".into(),
        ));
    }
    for polarity in [
        Polarity::Affirmed,
        Polarity::Negated,
        Polarity::NegatedOutOfScope,
    ] {
        if grammar.carriers_with(polarity).is_empty() {
            return Err(Error::Generation(format!(
                "no carrier template with polarity {polarity:?}"
            )));
        }
    }
    if grammar.infection_fillers.is_empty() {
        return Err(Error::Generation("no infection fillers".into()));
    }
    for filler in &grammar.infection_fillers {
        let tokens: Vec<&str> = filler.split_whitespace().collect();
        let hits = keyword_sets.find(&tokens);
        if hits.is_empty()
            || hits
                .iter()
                .any(|h| h.kind != super::keywords::KeywordKind::Infection)
        {
            return Err(Error::Generation(format!(
                "infection filler '{filler}' must mention only infection keywords"
            )));
        }
    }

    let group_fillers: Vec<Vec<String>> = keyword_sets
        .inflammation_groups
        .iter()
        .map(|g| g.iter().map(|p| p.join(" ")).collect())
        .collect();

    for t in &grammar.distractor_templates {
        grammar.check_template(t, &[])?;
    }
    for c in &grammar.carrier_templates {
        grammar.check_template(&c.text, &grammar.infection_fillers)?;
        for fillers in &group_fillers {
            grammar.check_template(&c.text, fillers)?;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let mut other_sentences = Vec::new();
    let mut seen = HashSet::new();
    let budget = grammar.distractor_target * 20;
    for _ in 0..budget {
        if other_sentences.len() >= grammar.distractor_target {
            break;
        }
        let template = grammar
            .distractor_templates
            .choose(&mut rng)
            .expect("checked non-empty");
        let sentence = grammar.fill(template, &[], &mut rng);
        if within_bounds(&sentence)
            && !keyword_sets.contains_keyword(&sentence)
            && seen.insert(sentence.clone())
        {
            other_sentences.push(sentence);
        }
    }

    let build_carriers = |fillers: &[String], rng: &mut ChaCha8Rng| {
        let mut pool = CarrierPool::default();
        for polarity in [
            Polarity::Affirmed,
            Polarity::Negated,
            Polarity::NegatedOutOfScope,
        ] {
            let templates = grammar.carriers_with(polarity);
            let mut seen = HashSet::new();
            let out = pool.get_mut(polarity);
            for _ in 0..grammar.carrier_target * 20 {
                if out.len() >= grammar.carrier_target {
                    break;
                }
                let template = templates.choose(rng).expect("checked non-empty");
                let sentence = grammar.fill(template, fillers, rng);
                if within_bounds(&sentence) && seen.insert(sentence.clone()) {
                    out.push(sentence);
                }
            }
        }
        pool
    };

    let infection_sentences = build_carriers(&grammar.infection_fillers, &mut rng);
    let inflammation_sentences = group_fillers
        .iter()
        .map(|fillers| build_carriers(fillers, &mut rng))
        .collect();

    Ok(SentencePool {
        infection_sentences,
        inflammation_sentences,
        other_sentences,
    })
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_owned).collect()
}

fn phrases(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| (*s).to_owned()).collect()
}

const MEDS: &str = "vancomycin cefepime ceftriaxone piperacillin tazobactam metronidazole \
    levofloxacin azithromycin heparin enoxaparin warfarin aspirin clopidogrel metoprolol \
    lisinopril amlodipine furosemide spironolactone insulin metformin glipizide atorvastatin \
    simvastatin pantoprazole omeprazole famotidine ondansetron acetaminophen ibuprofen \
    oxycodone morphine hydromorphone fentanyl lorazepam haloperidol quetiapine propofol \
    midazolam norepinephrine vasopressin phenylephrine dopamine albuterol ipratropium \
    prednisone methylprednisolone hydrocortisone levothyroxine potassium magnesium calcium \
    phosphate bicarbonate docusate senna lactulose rifaximin thiamine folate nystatin \
    fluconazole acyclovir gabapentin tramadol digoxin amiodarone diltiazem hydralazine \
    labetalol nitroglycerin carvedilol apixaban rivaroxaban";

const SITES: &str = "chest abdomen back neck head leg arm hand foot knee hip shoulder lung \
    heart liver kidney bladder bowel colon stomach spleen pancreas skin wound incision groin \
    pelvis spine ankle wrist elbow throat ear eye nose mouth tongue scalp flank thigh calf \
    sacrum heel toe finger jaw rib sternum clavicle femur forearm buttock gallbladder \
    esophagus trachea";

const EXAMS: &str = "ct mri xray ultrasound echo ekg cxr imaging labs cbc bmp ua abg vbg \
    telemetry doppler endoscopy colonoscopy bronchoscopy biopsy angiogram scan film study \
    panel smear lft coags troponin lactate";

const TEAMS: &str = "cardiology nephrology surgery neurology hepatology oncology pulmonary gi \
    psychiatry dermatology urology orthopedics pt ot nutrition pharmacy palliative \
    endocrinology hematology rheumatology";

const ADJECTIVES: &str = "stable unremarkable soft tender nontender distended clear diminished \
    warm dry intact normal mild moderate severe chronic acute bilateral left right small large \
    improved worsening unchanged elevated low high trace faint regular irregular pale pink \
    alert oriented calm anxious comfortable weak strong symmetric equal reactive supple patent \
    benign minimal marked diffuse focal scattered dependent pitting palpable firm coarse fine \
    brisk sluggish slow rapid shallow deep";

const FINDINGS: &str = "edema rash cough effusion nodule mass lesion murmur crackles wheezing \
    rales bruising swelling erythema drainage bleeding pain nausea vomiting diarrhea \
    constipation fatigue dizziness headache syncope dyspnea hypoxia hypotension hypertension \
    anemia thrombocytopenia hyponatremia hyperkalemia acidosis ascites jaundice pruritus ulcer \
    hematoma fracture stenosis atelectasis opacity cardiomegaly chills fever bradycardia \
    hypoglycemia tremor weakness numbness confusion agitation insomnia anorexia dysuria \
    hematuria melena hemoptysis orthopnea palpitations";

const VERBS: &str = "start continue hold titrate wean increase decrease monitor trend check \
    repeat follow consider discuss obtain order review adjust restart discontinue taper resume \
    add give change encourage advance schedule consult reassess";

const NOISE: &str = "note plan history admission discharge family bed floor unit nurse doctor \
    resident attending order dose rate level value pressure flow volume output intake weight \
    temp pulse saturation oxygen room air nasal cannula mask line tube drain foley catheter \
    port dressing gauze tape splint brace sling monitor pump drip bolus infusion injection \
    tablet capsule syrup patch cream ointment spray inhaler nebulizer vial bag syringe needle \
    glove gown sheet pillow blanket chair walker cane wheelchair stretcher elevator hallway \
    bathroom shower toilet commode window door light phone call page message chart record \
    report result sample specimen slide stain count ratio index score scale grade stage type \
    class group category list form sign symptom complaint problem issue concern question \
    answer reason cause effect change trend pattern course episode event visit stay transfer \
    ward clinic office lab pharmacy kitchen desk station shift morning evening night day week \
    month year hour minute time date schedule calendar appointment meeting conference rounds \
    team staff student visitor wife husband son daughter mother father brother sister friend \
    neighbor caregiver interpreter chaplain therapist technician aide clerk manager director \
    contact address home house apartment facility rehab nursing shelter car ride ambulance \
    transport insurance bill payment form consent code goals wishes preference \
    education teaching instructions handout video diagram model plan goal target limit \
    threshold baseline prior previous current recent new old next last first second third \
    other same different several many few each every all some any most least more less \
    approximately about around nearly roughly exactly only just still already again also \
    well better worse good bad fair poor excellent adequate appropriate reasonable likely \
    possible probable unclear uncertain pending ongoing completed scheduled planned requested";

const TIMES: &[&str] = &[
    "today",
    "overnight",
    "this morning",
    "this afternoon",
    "yesterday",
    "tonight",
    "on admission",
    "at baseline",
    "last night",
    "on rounds",
    "earlier today",
    "since admission",
    "per report",
    "on arrival",
];

const SUBJECTS: &[&str] = &["patient", "pt", "the patient", "he", "she", "this patient"];

const DIETS: &str = "regular clear liquid soft diabetic cardiac renal puree";

const DEVICES: &str = "walker cane assistance crutches wheelchair";

fn numbers() -> Vec<String> {
    (1..=40).map(|n| n.to_string()).collect()
}

impl Default for TemplateGrammar {
    fn default() -> Self {
        let mut slots = BTreeMap::new();
        slots.insert("med".to_owned(), words(MEDS));
        slots.insert("site".to_owned(), words(SITES));
        slots.insert("exam".to_owned(), words(EXAMS));
        slots.insert("team".to_owned(), words(TEAMS));
        slots.insert("adj".to_owned(), words(ADJECTIVES));
        slots.insert("finding".to_owned(), words(FINDINGS));
        slots.insert("verb".to_owned(), words(VERBS));
        slots.insert("w".to_owned(), words(NOISE));
        slots.insert("time".to_owned(), phrases(TIMES));
        slots.insert("subj".to_owned(), phrases(SUBJECTS));
        slots.insert("diet".to_owned(), words(DIETS));
        slots.insert("device".to_owned(), words(DEVICES));
        slots.insert("n".to_owned(), numbers());

        let distractor_templates = phrases(&[
            "{subj} seen and examined {time} .",
            "{med} {n} mg given {time} .",
            "{site} exam {adj} .",
            "no acute distress .",
            "{subj} tolerating {diet} diet .",
            "plan to continue {med} and {med} .",
            "{exam} performed without complication .",
            "{team} following , appreciate recs .",
            "{finding} on {exam} , {adj} .",
            "will {verb} {med} as needed .",
            "{subj} resting comfortably in bed .",
            "family updated at bedside {time} .",
            "{site} {adj} and {adj} .",
            "follow up {exam} in the morning .",
            "{n} of {n} {w} noted .",
            "{subj} reports {adj} {site} pain .",
            "labs reviewed , {finding} {adj} .",
            "{med} held for {finding} .",
            "continue current management per {team} .",
            "{w} {w} {w} {w} {w} .",
            "{subj} ambulating with {device} .",
            "not tolerating {diet} diet {time} .",
            "{exam} without {finding} .",
            "{w} {w} {w} .",
            "{adj} {finding} of the {site} .",
            "{subj} is {adj} and {adj} .",
            "{med} switched to {med} {time} .",
            "dispo pending {team} evaluation .",
            "{w} {w} {w} {w} {w} {w} {w} {w} .",
            "denies {finding} .",
            "{verb} {w} and {verb} {w} {time} .",
            "{subj} with {adj} {finding} , {verb} {med} .",
            "{site} {finding} {adj} on {exam} .",
            "{n} {w} {w} {time} .",
        ]);

        let carrier = |polarity, list: &[&str]| -> Vec<CarrierTemplate> {
            list.iter()
                .map(|t| CarrierTemplate {
                    text: (*t).to_owned(),
                    polarity,
                })
                .collect()
        };
        let mut carrier_templates = carrier(
            Polarity::Affirmed,
            &[
                "patient is suffering from {kw}",
                "{kw} exists .",
                "{subj} presented with {kw} {time} .",
                "exam notable for {kw} .",
                "{kw} noted on {exam} .",
                "ongoing {kw} , {w} {w} .",
                "findings consistent with {kw} per {team} .",
                "{subj} with persistent {kw} .",
                "concern for {kw} given {finding} .",
                "{kw} documented {time} by {team} .",
                "likely {kw} , will {verb} {med} .",
                "{subj} developed {kw} {time} .",
            ],
        );
        carrier_templates.extend(carrier(
            Polarity::Negated,
            &[
                "no signs of {kw} were found .",
                "no {kw} .",
                "denies {kw} {time} .",
                "negative for {kw} on {exam} .",
                "ruled out {kw} {time} .",
                "without evidence of {kw} .",
                "not consistent with {kw} per {team} .",
                "{subj} has no {kw} .",
                "{exam} negative for {kw} .",
                "unlikely to be {kw} .",
            ],
        ));
        carrier_templates.extend(carrier(
            Polarity::NegatedOutOfScope,
            &[
                "{kw} was ruled out {time} .",
                "no evidence of any recent or ongoing {kw} .",
                "no fever , chills , or {kw} .",
                "{kw} felt to be unlikely .",
                "{kw} not seen on {exam} .",
            ],
        ));

        TemplateGrammar {
            slots,
            distractor_templates,
            carrier_templates,
            infection_fillers: phrases(&[
                "pneumonia and empyema",
                "meningitis",
                "endocarditis",
                "infection",
                "urinary tract infection",
                "fungal infection",
                "wound infection",
            ]),
            distractor_target: 150,
            carrier_target: 15,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_vocabulary_is_large_and_keyword_free() {
        let grammar = TemplateGrammar::default();
        let sets = KeywordSets::default();
        let vocab = grammar.noise_vocabulary();
        assert!(vocab.len() >= 500, "only {} noise tokens", vocab.len());
        for kw in sets.keyword_tokens() {
            assert!(
                !vocab.contains(kw),
                "noise vocabulary contains keyword token '{kw}'"
            );
        }
    }

    #[test]
    fn pool_is_deterministic() {
        let sets = KeywordSets::default();
        let grammar = TemplateGrammar::default();
        let a = build_sentence_pool(&sets, &grammar, 7).unwrap();
        let b = build_sentence_pool(&sets, &grammar, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn simple_affirmative_sentence_is_producible() {
        let grammar = TemplateGrammar::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = grammar.fill(
            "patient is suffering from {kw}",
            &["hypothermia".to_owned()],
            &mut rng,
        );
        assert_eq!(s.join(" "), "patient is suffering from hypothermia");
    }

    #[test]
    fn pool_invariants_hold() {
        let sets = KeywordSets::default();
        let grammar = TemplateGrammar::default();
        let pool = build_sentence_pool(&sets, &grammar, 3).unwrap();
        assert_eq!(pool.other_sentences.len(), grammar.distractor_target);
        for s in &pool.other_sentences {
            assert!(within_bounds(s));
            assert!(!sets.contains_keyword(s));
        }
        let unique: HashSet<_> = pool.other_sentences.iter().collect();
        assert_eq!(unique.len(), pool.other_sentences.len());
        let carriers =
            std::iter::once(&pool.infection_sentences).chain(&pool.inflammation_sentences);
        for (g, carrier) in carriers.enumerate() {
            for (s, _) in carrier.iter() {
                assert!(within_bounds(s));
                assert!(sets.contains_keyword(s), "group {g}: {s:?}");
            }
            assert!(!carrier.affirmed.is_empty());
            assert!(!carrier.negated.is_empty());
            assert!(!carrier.negated_out_of_scope.is_empty());
        }
    }

    #[test]
    fn empty_distractor_list_is_an_error() {
        let mut grammar = TemplateGrammar::default();
        grammar.distractor_templates.clear();
        let err = build_sentence_pool(&KeywordSets::default(), &grammar, 7).unwrap_err();
        assert!(matches!(err, Error::Generation(_)));
    }

    #[test]
    fn overlong_template_is_named_in_error() {
        let mut grammar = TemplateGrammar::default();
        let long = "{w} ".repeat(16);
        grammar.distractor_templates.push(long.trim().to_owned());
        let err = build_sentence_pool(&KeywordSets::default(), &grammar, 7).unwrap_err();
        assert!(err.to_string().contains("{w} {w}"), "{err}");
    }

    #[test]
    fn carrier_templates_are_at_least_a_quarter_negated() {
        let grammar = TemplateGrammar::default();
        let negated = grammar
            .carrier_templates
            .iter()
            .filter(|c| c.polarity.is_negated())
            .count();
        assert!(negated * 4 >= grammar.carrier_templates.len());
    }
}
