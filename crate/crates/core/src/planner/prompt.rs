//! Prompt assembly for language backends. Texts are versioned assets; the inventory
//! line is regenerated from the labeled scene on every request.

use serde::{Deserialize, Serialize};

use super::world::WorldModel;

pub const PROMPT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptContext {
    pub role_text: String,
    pub library_text: String,
    pub example_text: String,
    pub ambiguity_text: String,
    pub format_text: String,
    pub scene_inventory: Vec<(String, usize)>,
}

impl PromptContext {
    /// Bundled texts with an empty inventory.
    pub fn standard() -> Self {
        PromptContext {
            role_text: include_str!("../../assets/prompts/v1/role.txt").trim_end().to_string(),
            library_text: include_str!("../../assets/prompts/v1/library.txt").trim_end().to_string(),
            example_text: include_str!("../../assets/prompts/v1/examples.txt").trim_end().to_string(),
            ambiguity_text: include_str!("../../assets/prompts/v1/ambiguity.txt").trim_end().to_string(),
            format_text: include_str!("../../assets/prompts/v1/format.txt").trim_end().to_string(),
            scene_inventory: Vec::new(),
        }
    }

    pub fn for_world(world: &WorldModel) -> Self {
        Self::standard().with_inventory(world.inventory())
    }

    pub fn with_inventory(mut self, inventory: Vec<(String, usize)>) -> Self {
        self.scene_inventory = inventory;
        self
    }

    pub fn inventory_line(&self) -> String {
        let items: Vec<String> = self.scene_inventory.iter().map(|(n, q)| format!("{n}: {q}")).collect();
        format!("The objects on the scene are {{{}}}.", items.join(", "))
    }

    /// System message: role, basic library, examples, ambiguity rule, answer format.
    pub fn system_message(&self) -> String {
        [
            self.role_text.as_str(),
            "The basic library contains these motion functions:",
            self.library_text.as_str(),
            self.example_text.as_str(),
            self.ambiguity_text.as_str(),
            self.format_text.as_str(),
        ]
        .join("\n")
    }

    pub fn user_message(&self, task: &str) -> String {
        format!("{}\nTask: {}", self.inventory_line(), task.trim())
    }
}
