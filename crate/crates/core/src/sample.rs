use serde::{Deserialize, Serialize};

use crate::compile::{ContractContext, PLACEHOLDER};
use crate::parser::RawOutput;

/// One scoring unit: contract context, requirement and the raw generation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationSample {
    pub id: String,
    /// Contract the generated function is spliced into. A bare wrapper
    /// contract is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContractContext>,
    #[serde(default)]
    pub function_name: String,
    #[serde(default)]
    pub requirement: String,
    pub output: RawOutput,
}

impl GenerationSample {
    pub fn new(id: impl Into<String>, output: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            context: None,
            function_name: String::new(),
            requirement: String::new(),
            output: RawOutput::new(output),
        }
    }

    pub fn with_context(mut self, context: ContractContext) -> Self {
        self.context = Some(context);
        self
    }

    /// The explicit context or the default wrapper contract.
    pub fn effective_context(&self) -> ContractContext {
        self.context.clone().unwrap_or_else(|| ContractContext {
            source: default_wrapper(),
            target_function_name: if self.function_name.is_empty() { "target".into() } else { self.function_name.clone() },
            pragma_constraint: None,
            contract_name: None,
        })
    }
}

pub fn default_wrapper() -> String {
    format!("// SPDX-License-Identifier: UNLICENSED\npragma solidity ^0.8.0;\n\ncontract Generated {{\n{PLACEHOLDER}\n}}\n")
}
