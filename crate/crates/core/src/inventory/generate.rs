//! Seeded synthetic benchmark.
//!
//! Intents are (action, product) attribute pairs. Every attribute value has
//! one or more surface forms; each surface form in use becomes a label that
//! maps to exactly the intents whose text uses that form, so a value with
//! several forms yields a synonym group whose members split its intents.
//! An ambiguous query keeps one attribute of a random intent and drops the
//! other, and its potential-intent set is every intent sharing the kept value.

use super::{AnnotatedQuery, Corpus, Intent, IntentId, Inventory, InventoryError, Label, LabelId, Split};
use crate::rng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::sync::Arc;

const ACTIONS: &[&[&str]] = &[
    &["apply", "sign up", "request"],
    &["cancel", "terminate", "stop"],
    &["activate", "enable", "switch on"],
    &["block", "lock", "suspend"],
    &["renew", "extend", "prolong"],
    &["update", "modify", "edit"],
    &["check", "view", "look up"],
    &["pay", "settle", "pay off"],
    &["transfer", "move", "send"],
    &["close", "shut down", "deactivate"],
    &["open", "set up", "create"],
    &["report", "flag", "notify"],
    &["replace", "swap", "exchange"],
    &["reset", "recover", "restore"],
    &["upgrade", "improve", "boost"],
    &["redeem", "cash in", "spend"],
    &["dispute", "contest", "challenge"],
    &["withdraw", "take out", "pull out"],
    &["deposit", "put in", "top up"],
    &["freeze", "pause", "hold"],
    &["link", "connect", "attach"],
    &["verify", "confirm", "validate"],
    &["claim", "file", "submit"],
    &["refund", "reimburse", "get back"],
    &["schedule", "plan", "book"],
    &["download", "export", "save"],
    &["order", "buy", "purchase"],
    &["track", "follow", "monitor"],
    &["increase", "raise", "lift"],
    &["reduce", "lower", "cut"],
    &["share", "forward", "distribute"],
    &["print", "print out", "get copy"],
    &["compare", "contrast", "weigh"],
    &["calculate", "estimate", "compute"],
    &["unlock", "unblock", "release"],
    &["split", "divide", "separate"],
    &["sign", "endorse", "countersign"],
    &["appeal", "object", "protest"],
    &["customize", "personalize", "tailor"],
    &["delete", "remove", "erase"],
];

const PRODUCTS: &[&[&str]] = &[
    &["credit card", "charge card"],
    &["debit card", "bank card"],
    &["loan", "personal loan", "credit line"],
    &["mortgage", "home loan", "house loan"],
    &["qr code", "payment code"],
    &["savings account", "deposit account"],
    &["checking account", "current account"],
    &["health insurance", "medical insurance"],
    &["car insurance", "auto insurance", "vehicle insurance"],
    &["home insurance", "homeowners insurance", "property insurance"],
    &["travel insurance", "trip insurance"],
    &["life insurance", "life cover"],
    &["pension", "retirement plan"],
    &["mobile app", "phone app"],
    &["online banking", "internet banking", "web banking"],
    &["password", "passcode"],
    &["pin", "pin number"],
    &["statement", "bank statement", "account statement"],
    &["bill", "invoice"],
    &["direct debit", "standing order"],
    &["overdraft", "overdraft limit"],
    &["cheque book", "checkbook"],
    &["gift card", "voucher"],
    &["reward points", "loyalty points", "bonus points"],
    &["membership", "member plan"],
    &["subscription", "recurring plan"],
    &["phone number", "mobile number"],
    &["email address", "email"],
    &["home address", "mailing address"],
    &["student loan", "education loan"],
    &["car loan", "auto loan"],
    &["investment fund", "mutual fund"],
    &["stock account", "brokerage account"],
    &["foreign currency", "forex"],
    &["wire transfer", "bank transfer"],
    &["atm card", "cash card"],
    &["safe deposit box", "safety box"],
    &["business account", "company account"],
    &["joint account", "shared account"],
    &["credit limit", "spending limit"],
    &["credit score", "credit rating"],
    &["tax form", "tax document"],
    &["payroll", "salary account"],
    &["e wallet", "digital wallet"],
    &["contactless payment", "tap to pay"],
    &["fixed deposit", "term deposit"],
    &["pet insurance", "animal insurance"],
    &["dental plan", "dental cover"],
    &["annual fee", "yearly fee"],
    &["cashback", "cash rebate"],
    &["beneficiary", "payee"],
    &["account alert", "sms alert"],
    &["fraud case", "fraud report"],
    &["appointment", "branch visit"],
    &["chargeback", "payment reversal"],
    &["insurance policy", "policy document"],
    &["installment plan", "payment plan"],
    &["virtual card", "online card"],
    &["credit report", "credit history"],
    &["exchange rate", "fx rate"],
];

const INTENT_TEMPLATES: &[&str] = &["how to {a} {p}", "how do i {a} my {p}", "{a} {p}", "can i {a} my {p} online"];
const ACTION_QUERY_TEMPLATES: &[&str] = &["how to {a}", "how do i {a}", "i want to {a}", "{a}", "can i {a} online", "help me {a}"];
const PRODUCT_QUERY_TEMPLATES: &[&str] = &["{p}", "my {p}", "question about {p}", "{p} problem", "about my {p}", "help with {p}"];

/// Generator settings. The attribute-value counts and synonym budget are
/// free parameters of the benchmark, not measured quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub intents: usize,
    pub labels: usize,
    pub queries: usize,
    pub actions: usize,
    pub products: usize,
    /// Probability that a query keeps the action and drops the product.
    pub keep_action_prob: f64,
    /// Fraction of queries assigned to the test split.
    pub test_fraction: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            intents: 200,
            labels: 80,
            queries: 500,
            actions: 20,
            products: 40,
            keep_action_prob: 0.5,
            test_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Attribute {
    Action(usize),
    Product(usize),
}

/// A generated corpus together with the attribute structure it was built from.
#[derive(Debug, Clone)]
pub struct Benchmark {
    pub corpus: Corpus,
    /// (action value, product value) per intent id.
    pub intent_attributes: Vec<(usize, usize)>,
    /// The attribute value each query kept.
    pub query_attribute: Vec<Attribute>,
    pub action_names: Vec<String>,
    pub product_names: Vec<String>,
}

pub fn generate_benchmark(cfg: &GeneratorConfig, seed: u64) -> Result<Corpus, InventoryError> {
    generate_benchmark_detailed(cfg, seed).map(|b| b.corpus)
}

pub fn generate_benchmark_detailed(cfg: &GeneratorConfig, seed: u64) -> Result<Benchmark, InventoryError> {
    let config_err = |m: String| InventoryError::Config(m);
    if cfg.actions == 0 || cfg.products == 0 {
        return Err(config_err("need at least one action and one product".into()));
    }
    if cfg.actions > ACTIONS.len() || cfg.products > PRODUCTS.len() {
        return Err(config_err(format!(
            "at most {} actions and {} products are available",
            ACTIONS.len(),
            PRODUCTS.len()
        )));
    }
    let values = cfg.actions + cfg.products;
    if cfg.labels < values {
        return Err(config_err(format!(
            "label count {} is below the number of distinct attribute values {values}",
            cfg.labels
        )));
    }
    if cfg.intents > cfg.actions * cfg.products || cfg.intents < cfg.actions.max(cfg.products) {
        return Err(config_err(format!(
            "intent count {} must lie in [{}, {}]",
            cfg.intents,
            cfg.actions.max(cfg.products),
            cfg.actions * cfg.products
        )));
    }
    if !(0.0..=1.0).contains(&cfg.keep_action_prob) || !(0.0..=1.0).contains(&cfg.test_fraction) {
        return Err(config_err("probabilities must lie in [0, 1]".into()));
    }

    let mut rng = rng::stream(seed, &[0x6E4]);

    let mut action_pool: Vec<usize> = (0..ACTIONS.len()).collect();
    action_pool.shuffle(&mut rng);
    let actions: Vec<&[&str]> = action_pool[..cfg.actions].iter().map(|&i| ACTIONS[i]).collect();
    let mut product_pool: Vec<usize> = (0..PRODUCTS.len()).collect();
    product_pool.shuffle(&mut rng);
    let products: Vec<&[&str]> = product_pool[..cfg.products].iter().map(|&i| PRODUCTS[i]).collect();

    // Every value appears in at least one intent; the rest fill the grid at random.
    let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut perm_a: Vec<usize> = (0..cfg.actions).collect();
    let mut perm_p: Vec<usize> = (0..cfg.products).collect();
    perm_a.shuffle(&mut rng);
    perm_p.shuffle(&mut rng);
    for k in 0..cfg.actions.max(cfg.products) {
        pairs.insert((perm_a[k % cfg.actions], perm_p[k % cfg.products]));
    }
    let mut rest: Vec<(usize, usize)> = (0..cfg.actions)
        .flat_map(|a| (0..cfg.products).map(move |p| (a, p)))
        .filter(|pair| !pairs.contains(pair))
        .collect();
    rest.shuffle(&mut rng);
    pairs.extend(rest.into_iter().take(cfg.intents - pairs.len()));
    let mut intent_attributes: Vec<(usize, usize)> = pairs.into_iter().collect();
    intent_attributes.shuffle(&mut rng);

    let mut action_members = vec![Vec::new(); cfg.actions];
    let mut product_members = vec![Vec::new(); cfg.products];
    for (i, &(a, p)) in intent_attributes.iter().enumerate() {
        action_members[a].push(i);
        product_members[p].push(i);
    }

    // Synonym budget: activate extra surface forms on random eligible values.
    // A value can only carry as many forms as it has intents.
    let mut active_forms: Vec<usize> = vec![1; values];
    let max_forms = |v: usize| -> usize {
        if v < cfg.actions {
            actions[v].len().min(action_members[v].len())
        } else {
            let p = v - cfg.actions;
            products[p].len().min(product_members[p].len())
        }
    };
    for _ in values..cfg.labels {
        let eligible: Vec<usize> = (0..values).filter(|&v| active_forms[v] < max_forms(v)).collect();
        if eligible.is_empty() {
            return Err(config_err(format!(
                "not enough synonym surface forms to reach {} labels",
                cfg.labels
            )));
        }
        active_forms[eligible[rng.random_range(0..eligible.len())]] += 1;
    }

    // Surface form used by each intent for each attribute; round-robin over a
    // shuffled member list so every active form is used at least once.
    let mut action_form = vec![0usize; intent_attributes.len()];
    let mut product_form = vec![0usize; intent_attributes.len()];
    for (a, members) in action_members.iter().enumerate() {
        let mut m = members.clone();
        m.shuffle(&mut rng);
        for (k, &i) in m.iter().enumerate() {
            action_form[i] = k % active_forms[a];
        }
    }
    for (p, members) in product_members.iter().enumerate() {
        let mut m = members.clone();
        m.shuffle(&mut rng);
        for (k, &i) in m.iter().enumerate() {
            product_form[i] = k % active_forms[cfg.actions + p];
        }
    }

    let intents: Vec<Intent> = intent_attributes
        .iter()
        .enumerate()
        .map(|(i, &(a, p))| {
            let a_text = actions[a][action_form[i]];
            let p_text = products[p][product_form[i]];
            let template = INTENT_TEMPLATES[rng.random_range(0..INTENT_TEMPLATES.len())];
            Intent {
                id: IntentId(i as u32),
                text: template.replace("{a}", a_text).replace("{p}", p_text),
                answer: format!("To {a_text} your {p_text}, open the {p_text} page in the app and choose \"{a_text}\"."),
            }
        })
        .collect();

    let mut label_specs: Vec<(String, Vec<IntentId>)> = Vec::with_capacity(cfg.labels);
    for v in 0..values {
        for form in 0..active_forms[v] {
            let (phrase, members): (&str, Vec<IntentId>) = if v < cfg.actions {
                (
                    actions[v][form],
                    action_members[v]
                        .iter()
                        .filter(|&&i| action_form[i] == form)
                        .map(|&i| IntentId(i as u32))
                        .collect(),
                )
            } else {
                let p = v - cfg.actions;
                (
                    products[p][form],
                    product_members[p]
                        .iter()
                        .filter(|&&i| product_form[i] == form)
                        .map(|&i| IntentId(i as u32))
                        .collect(),
                )
            };
            label_specs.push((phrase.to_string(), members));
        }
    }
    label_specs.shuffle(&mut rng);
    let labels: Vec<Label> = label_specs
        .into_iter()
        .enumerate()
        .map(|(i, (phrase, intents))| Label {
            id: LabelId(i as u32),
            phrase,
            intents,
        })
        .collect();

    let inventory = Arc::new(Inventory::new(intents, labels).map_err(|e| config_err(e.to_string()))?);

    let mut queries = Vec::with_capacity(cfg.queries);
    let mut query_attribute = Vec::with_capacity(cfg.queries);
    for _ in 0..cfg.queries {
        let i = rng.random_range(0..intent_attributes.len());
        let (a, p) = intent_attributes[i];
        let (text, members, attr) = if rng.random_bool(cfg.keep_action_prob) {
            let form = actions[a][rng.random_range(0..active_forms[a])];
            let t = ACTION_QUERY_TEMPLATES[rng.random_range(0..ACTION_QUERY_TEMPLATES.len())];
            (t.replace("{a}", form), &action_members[a], Attribute::Action(a))
        } else {
            let form = products[p][rng.random_range(0..active_forms[cfg.actions + p])];
            let t = PRODUCT_QUERY_TEMPLATES[rng.random_range(0..PRODUCT_QUERY_TEMPLATES.len())];
            (t.replace("{p}", form), &product_members[p], Attribute::Product(p))
        };
        queries.push(AnnotatedQuery::new(
            text,
            members.iter().map(|&i| IntentId(i as u32)),
            Split::Train,
        )?);
        query_attribute.push(attr);
    }
    let n_test = (cfg.queries as f64 * cfg.test_fraction).round() as usize;
    let mut order: Vec<usize> = (0..cfg.queries).collect();
    order.shuffle(&mut rng);
    for &i in &order[..n_test] {
        queries[i].split = Split::Test;
    }

    Ok(Benchmark {
        corpus: Corpus {
            inventory,
            queries,
            seed,
            generator: Some(cfg.clone()),
        },
        intent_attributes,
        query_attribute,
        action_names: actions.iter().map(|f| f[0].to_string()).collect(),
        product_names: products.iter().map(|f| f[0].to_string()).collect(),
    })
}
