use mapeval_gateway::{ChatRequest, Gateway, Message, DEFAULT_MODEL_ID};

/// Sampling temperatures per pipeline stage. Judging always runs at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperatures {
    pub describe: f64,
    pub generate: f64,
    pub validate: f64,
    pub answer: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Self {
            describe: 0.0,
            generate: 0.7,
            validate: 0.0,
            answer: 0.0,
        }
    }
}

/// Gateway plus the model settings each stage needs.
#[derive(Debug, Clone, Copy)]
pub struct Llm<'a> {
    pub gateway: &'a Gateway,
    pub model_id: &'a str,
    pub temperatures: Temperatures,
}

impl<'a> Llm<'a> {
    pub fn new(gateway: &'a Gateway) -> Self {
        Self {
            gateway,
            model_id: DEFAULT_MODEL_ID,
            temperatures: Temperatures::default(),
        }
    }

    pub(crate) fn request(&self, messages: Vec<Message>, temperature: f64) -> ChatRequest {
        ChatRequest::new(self.model_id, messages).temperature(temperature)
    }
}
