//! Small synthetic travel corpora with matching mock lexicons, for tests,
//! demos and calibration runs.
//!
//! Each slot label draws from its own value list, so surface forms never
//! collide across labels.

use std::collections::BTreeMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{AnnotatedUtterance, Dataset, SlotSpan};
use crate::filtering::parse_candidate;
use crate::generation::{mock_generate, LanguageLexicon, MockLexicon, SamplingConfig};
use crate::prompt::{build_prompt, OperationPolicy, PromptError, TargetLanguage};
use crate::rng::StreamKey;

pub const DOMAIN: &str = "travel";

/// (intent, weight, templates). `{label}` marks a slot.
const TEMPLATES: &[(&str, u32, &[&str])] = &[
    (
        "flight",
        5,
        &[
            "i need a flight from {fromloc.city_name} to {toloc.city_name}",
            "show me flights from {fromloc.city_name} to {toloc.city_name} on {depart_date.day_name}",
            "list {airline_name} flights to {toloc.city_name}",
            "i want to fly to {toloc.city_name} on {depart_date.day_name}",
        ],
    ),
    (
        "airfare",
        3,
        &[
            "what is the cheapest fare from {fromloc.city_name} to {toloc.city_name}",
            "how much does a ticket to {toloc.city_name} cost",
            "fares on {airline_name} from {fromloc.city_name}",
        ],
    ),
    (
        "ground_service",
        2,
        &[
            "what ground transportation is available in {city_name}",
            "is there a shuttle in {city_name}",
        ],
    ),
    (
        "airline",
        2,
        &[
            "which airlines fly from {fromloc.city_name}",
            "what airline serves {toloc.city_name}",
        ],
    ),
    (
        "abbreviation",
        1,
        &["what does {fare_basis_code} mean", "explain the code {fare_basis_code}"],
    ),
];

const VALUES: &[(&str, &[&str])] = &[
    (
        "fromloc.city_name",
        &["boston", "denver", "pittsburgh", "atlanta", "salt lake city"],
    ),
    (
        "toloc.city_name",
        &["dallas", "san francisco", "new york", "baltimore", "las vegas"],
    ),
    ("city_name", &["seattle", "miami", "phoenix"]),
    ("depart_date.day_name", &["monday", "tuesday", "friday", "sunday"]),
    ("airline_name", &["delta", "united", "american airlines"]),
    ("fare_basis_code", &["qx", "fn", "yn"]),
];

/// English carrier word -> (es, de, fr).
const CARRIER: &[(&str, &str, &str, &str)] = &[
    ("i", "yo", "ich", "je"),
    ("need", "necesito", "brauche", "besoin"),
    ("a", "un", "einen", "un"),
    ("flight", "vuelo", "flug", "vol"),
    ("from", "desde", "von", "de"),
    ("to", "a", "nach", "vers"),
    ("show", "muestrame", "zeige", "montre"),
    ("me", "me", "mir", "moi"),
    ("flights", "vuelos", "fluege", "vols"),
    ("on", "el", "am", "le"),
    ("list", "enumera", "liste", "liste"),
    ("want", "quiero", "will", "veux"),
    ("fly", "volar", "fliegen", "voler"),
    ("what", "que", "was", "quel"),
    ("is", "es", "ist", "est"),
    ("the", "la", "der", "le"),
    ("cheapest", "mas_barata", "billigste", "moins_cher"),
    ("fare", "tarifa", "tarif", "tarif"),
    ("how", "cuanto", "wie", "combien"),
    ("much", "cuesta", "viel", "coute"),
    ("does", "hace", "tut", "fait"),
    ("ticket", "billete", "ticket", "billet"),
    ("cost", "costo", "kosten", "prix"),
    ("fares", "tarifas", "tarife", "tarifs"),
    ("ground", "terrestre", "boden", "terrestre"),
    ("transportation", "transporte", "transport", "transport"),
    ("available", "disponible", "verfuegbar", "disponible"),
    ("in", "en", "in", "a"),
    ("there", "hay", "gibt", "y"),
    ("shuttle", "lanzadera", "shuttle", "navette"),
    ("which", "cuales", "welche", "quelles"),
    ("airlines", "aerolineas", "fluglinien", "compagnies"),
    ("airline", "aerolinea", "fluglinie", "compagnie"),
    ("serves", "sirve", "bedient", "dessert"),
    ("mean", "significa", "bedeutet", "signifie"),
    ("explain", "explica", "erklaere", "explique"),
    ("code", "codigo", "code", "code"),
];

const DAYS: &[(&str, &str, &str, &str)] = &[
    ("monday", "lunes", "montag", "lundi"),
    ("tuesday", "martes", "dienstag", "mardi"),
    ("friday", "viernes", "freitag", "vendredi"),
    ("sunday", "domingo", "sonntag", "dimanche"),
];

/// English name, then two local names each for es, de, fr.
type Localized = (&'static str, [&'static str; 2], [&'static str; 2], [&'static str; 2]);

/// Per-language local replacements for each English city, disjoint across labels.
const LOCAL_CITIES: &[Localized] = &[
    (
        "boston",
        ["madrid", "toledo"],
        ["berlin", "potsdam"],
        ["paris", "versailles"],
    ),
    (
        "denver",
        ["sevilla", "cadiz"],
        ["munchen", "augsburg"],
        ["lyon", "grenoble"],
    ),
    (
        "pittsburgh",
        ["bilbao", "leon"],
        ["hamburg", "kiel"],
        ["lille", "amiens"],
    ),
    (
        "atlanta",
        ["valencia", "alicante"],
        ["koeln", "bonn"],
        ["nantes", "angers"],
    ),
    (
        "salt lake city",
        ["santiago de compostela", "lugo"],
        ["frankfurt am main", "mainz"],
        ["aix en provence", "arles"],
    ),
    (
        "dallas",
        ["barcelona", "girona"],
        ["dresden", "leipzig"],
        ["marseille", "toulon"],
    ),
    (
        "san francisco",
        ["malaga", "marbella"],
        ["stuttgart", "ulm"],
        ["nice", "cannes"],
    ),
    (
        "new york",
        ["zaragoza", "huesca"],
        ["duesseldorf", "essen"],
        ["bordeaux", "pau"],
    ),
    (
        "baltimore",
        ["granada", "jaen"],
        ["bremen", "oldenburg"],
        ["toulouse", "albi"],
    ),
    (
        "las vegas",
        ["palma de mallorca", "ibiza"],
        ["bad homburg", "fulda"],
        ["saint etienne", "nimes"],
    ),
    (
        "seattle",
        ["oviedo", "gijon"],
        ["hannover", "celle"],
        ["rennes", "brest"],
    ),
    (
        "miami",
        ["murcia", "cartagena"],
        ["nuernberg", "erlangen"],
        ["dijon", "besancon"],
    ),
    (
        "phoenix",
        ["cordoba", "huelva"],
        ["wiesbaden", "darmstadt"],
        ["reims", "metz"],
    ),
];

const AIRLINES: &[Localized] = &[
    (
        "delta",
        ["iberia", "vueling"],
        ["lufthansa", "condor"],
        ["air france", "transavia"],
    ),
    (
        "united",
        ["air europa", "volotea"],
        ["eurowings", "tuifly"],
        ["corsair", "hop"],
    ),
    (
        "american airlines",
        ["binter", "air nostrum"],
        ["germania", "sundair"],
        ["aigle azur", "xl airways"],
    ),
];

pub const LANGUAGES: &[&str] = &["es", "de", "fr"];

fn column(lang: &str) -> usize {
    LANGUAGES
        .iter()
        .position(|l| *l == lang)
        .unwrap_or_else(|| panic!("no synthetic lexicon for {lang:?}"))
}

/// A weighted random sample of `n` English utterances.
pub fn corpus(n: usize, seed: u64) -> Dataset {
    let total: u32 = TEMPLATES.iter().map(|t| t.1).sum();
    let values: BTreeMap<&str, &[&str]> = VALUES.iter().copied().collect();
    let records = (0..n)
        .map(|i| {
            let mut rng = StreamKey::new("synthetic-corpus").u64(seed).u64(i as u64).rng();
            let mut pick = rng.random_range(0..total);
            let (intent, _, templates) = TEMPLATES
                .iter()
                .find(|t| {
                    if pick < t.1 {
                        true
                    } else {
                        pick -= t.1;
                        false
                    }
                })
                .expect("weights cover range");
            let template = templates.choose(&mut rng).expect("templates");
            let mut tokens = Vec::new();
            let mut slots = Vec::new();
            for part in template.split(' ') {
                if let Some(label) = part.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
                    let value = values[label].choose(&mut rng).expect("values");
                    let start = tokens.len();
                    tokens.extend(value.split(' ').map(String::from));
                    slots.push(SlotSpan::new(start, tokens.len() - 1, label));
                } else {
                    tokens.push(part.to_string());
                }
            }
            AnnotatedUtterance::new(tokens, *intent, "en", slots)
                .expect("template is well-formed")
                .with_domain(DOMAIN)
        })
        .collect();
    Dataset::new(records, format!("synthetic seed {seed}"))
}

fn pick<'a>(row: &(&'a str, &'a str, &'a str, &'a str), col: usize) -> &'a str {
    [row.1, row.2, row.3][col]
}

/// A noise-free lexicon covering every template word and value for `languages`.
pub fn lexicon(languages: &[&str]) -> MockLexicon {
    let mut out = BTreeMap::new();
    for &lang in languages {
        let col = column(lang);
        let mut lex = LanguageLexicon::default();
        for row in CARRIER {
            lex.carrier.insert(row.0.to_string(), pick(row, col).to_string());
        }
        for row in DAYS {
            lex.translations.insert(row.0.to_string(), pick(row, col).to_string());
        }
        for (en, es, de, fr) in LOCAL_CITIES.iter().chain(AIRLINES) {
            let local = [es, de, fr][col];
            lex.localizations
                .insert(en.to_string(), local.iter().map(|s| s.to_string()).collect());
            // translating a name keeps it
            lex.translations.insert(en.to_string(), en.to_string());
        }
        for code in ["qx", "fn", "yn"] {
            lex.translations.insert(code.to_string(), code.to_string());
        }
        out.insert(lang.to_string(), lex);
    }
    MockLexicon {
        languages: out,
        ..Default::default()
    }
}

/// The first noise-free mock candidate of every record, parsed: a clean
/// target-language counterpart of `en`.
pub fn reference_translation(
    en: &Dataset,
    target: &TargetLanguage,
    policy: &OperationPolicy,
    seed: u64,
) -> Result<Dataset, PromptError> {
    let mut lex = lexicon(&[target.code.as_str()]);
    lex.seed = seed;
    let config = SamplingConfig::with_n(1);
    let mut records = Vec::with_capacity(en.len());
    for (i, u) in en.iter().enumerate() {
        let domain = u.domain.clone().unwrap_or_else(|| DOMAIN.to_string());
        let prompt = build_prompt(u, target, &domain, policy)?;
        let cs = mock_generate(&lex, &format!("ref:{i}"), &prompt, &config)
            .expect("synthetic lexicon covers the synthetic corpus");
        let parsed = parse_candidate(&prompt, u.domain.clone(), cs.candidates[0].text.as_str())
            .expect("noise-free candidate parses");
        records.push(parsed);
    }
    Ok(Dataset::new(records, format!("{} reference", target.code)))
}
