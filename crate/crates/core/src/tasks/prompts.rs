use rand::seq::SliceRandom;
use rand::Rng;

/// Families of interchangeable prompt wordings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PromptKind {
    RoomDescription,
    RoomBackstory,
    Description,
    Persona,
    AddObject,
    AddContained,
    AddWielded,
    AddCarried,
    AddWorn,
    AddCharacter,
    Type,
    Gettable,
    Drinkable,
    Edible,
    Container,
    Surface,
    Weapon,
    Wearable,
    /// Free-form attributes carried by `HAS_ATTRIBUTE`.
    Attribute,
}

/// Every wording of `kind`, with `{name}` filled in.
pub fn prompt_variants(kind: PromptKind, name: &str) -> Vec<String> {
    let templates: &[&str] = match kind {
        PromptKind::RoomDescription => &["describe the room"],
        PromptKind::RoomBackstory => &["background", "describe the room backstory", "room backstory"],
        PromptKind::Description => &["describe {name}", "examine {name}"],
        PromptKind::Persona => &["what is the persona of {name}", "describe the persona of {name}"],
        PromptKind::AddObject => &["add object", "add a new object", "suggest a new object"],
        PromptKind::AddContained => &[
            "add object contained by {name}",
            "suggest a new object contained by {name}",
        ],
        PromptKind::AddWielded => &[
            "add object wielded by {name}",
            "suggest a new object wielded by {name}",
        ],
        PromptKind::AddCarried => &[
            "add object carried by {name}",
            "suggest a new object carried by {name}",
        ],
        PromptKind::AddWorn => &["add object worn by {name}", "suggest a new object worn by {name}"],
        PromptKind::AddCharacter => &["add character", "add a new character", "suggest a new character"],
        PromptKind::Type => &[
            "what is the type of {name}",
            "what type is {name}",
            "what type of item is {name}",
            "{name} is what type",
        ],
        PromptKind::Gettable => &["Is {name} gettable?", "Can I pick up {name}?"],
        PromptKind::Drinkable => &["Is {name} drinkable?", "Can I drink {name}?"],
        PromptKind::Edible => &["Is {name} edible?", "Can I eat {name}?", "Is {name} a food?"],
        PromptKind::Container => &["Is {name} container?", "Can I put something inside {name}?"],
        PromptKind::Surface => &["Does {name} have usable surface?", "Can I put something on {name}?"],
        PromptKind::Weapon => &["Is {name} a weapon?", "Can I use {name} as a weapon?"],
        PromptKind::Wearable => &["Is {name} wearable?", "Can I wear {name}?"],
        PromptKind::Attribute => &["what attribute does {name} have?", "describe an attribute of {name}"],
    };
    templates.iter().map(|t| t.replace("{name}", name)).collect()
}

/// Uniform draw over the wordings of `kind`.
pub(crate) fn choose_prompt<R: Rng + ?Sized>(kind: PromptKind, name: &str, rng: &mut R) -> String {
    prompt_variants(kind, name)
        .choose(rng)
        .cloned()
        .expect("every prompt family is nonempty")
}

pub fn narration_prompt(observer: &str, actor: &str, act: &str) -> String {
    format!("narrate from {observer} perspective: {actor} {act}")
}

pub fn graph_update_prompt(actor: &str, act: &str) -> String {
    format!("modify graph after: {actor} {act}")
}
