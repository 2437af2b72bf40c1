"""Prompt templates used by the pipeline agents.

Templates declare their placeholders explicitly; rendering substitutes
exactly those and nothing else, so literal braces (e.g. in JSON examples)
survive untouched. Rendering is strict: an unbound placeholder raises, and
the rendered text is re-scanned so no prompt ever reaches a provider with
an unsubstituted placeholder.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from susreq.errors import UnboundPlaceholder, UnknownTemplate

_REACT_FORMAT = """Use the following format for reasoning:

Question: the input question you must answer
Thought: you should always think about what to do
Action: the action to take, should be one of [{tool_names}]
Action Input: the input to the action
Observation: the result of the action
... (this Thought/Action/Action Input/Observation can repeat N times)
Thought: I now know the final answer
Final Answer: the final answer to the original input question

Begin!

Question: {input}
Thought:{agent_scratchpad}"""


GRAPH_EXTRACTION = """You are an AI assistant that extracts sustainability knowledge from a given standard document as input into a knowledge graph.

[Input Document]

{document}

You must follow this ontology for constructing the knowledge graph:

Classes:

1. Goal: A high-level sustainability objective. Attributes: id, name, description, startDate, endDate

2. Target: A specific, measurable objective that contributes to a Goal. Attributes: id, name, description, startDate, endDate

3. Indicator: A metric used to track progress towards a Target. Attributes: id, name, description, startDate, endDate, unitOfMeasure

Relationships (use these exact property names in output):

1. hasTarget (Goal -> Target): Connects a Goal to its specific Targets.

2. isMeasuredBy (Target -> Indicator): Connects a Target to Indicators that measure progress.

3. relatesTo: Generic relation to capture links between Goals, Targets, or Indicators. Use when one entity influences, supports, or is otherwise related to another.

Task: From the input text, identify Goals, Targets, and Indicators and output one structured JSON object. Follow these output rules strictly:

1. The object has exactly two keys: "entities" and "relationships".

2. Every entity object must include id, type, and name.

3. Express relationships as objects {"from": "<id>", "to": "<id>", "type": "hasTarget|isMeasuredBy|relatesTo"}.

4. Use null for unknown attributes (e.g., startDate/endDate).

5. Keep output only the JSON object (no extra text).

Example Input Text:

Goal G1: Ensure access to affordable, safe, and sustainable housing for all.

Target: Reduce chronic homelessness by at least 31% by March 2024.

Indicator: Number of chronically homeless individuals.

Goal G2: Make cities inclusive, safe, resilient, and sustainable.

Target: By 2030, ensure access for all to adequate housing and basic services.

Indicator: Proportion of urban population living in slums.

Goal G3: Encourage inclusive and sustainable economic growth in Canada.

Target: By 2030, achieve full and productive employment and decent work for all.

Indicator: Unemployment rate (% of population).

Output:

{
  "entities": [
    {"id": "G1", "type": "Goal", "name": "Ensure access to affordable, safe, and sustainable housing for all", "description": "A sustainability goal focused on improving housing accessibility and affordability."},
    {"id": "T1", "type": "Target", "name": "Reduce chronic homelessness by at least 31% by March 2024", "description": "A measurable target contributing to affordable housing."},
    {"id": "I1", "type": "Indicator", "name": "Number of chronically homeless individuals", "unitOfMeasure": "count"},
    {"id": "G2", "type": "Goal", "name": "Make cities inclusive, safe, resilient, and sustainable", "description": "A sustainability goal for urban development."},
    {"id": "T2", "type": "Target", "name": "By 2030, ensure access for all to adequate housing and basic services", "description": "A target contributing to urban sustainability."},
    {"id": "I2", "type": "Indicator", "name": "Proportion of urban population living in slums", "unitOfMeasure": "percentage"},
    {"id": "G3", "type": "Goal", "name": "Encourage inclusive and sustainable economic growth in Canada", "description": "A goal focused on fostering economic sustainability."},
    {"id": "T3", "type": "Target", "name": "By 2030, achieve full and productive employment and decent work for all", "description": "A target contributing to sustainable economic growth."},
    {"id": "I3", "type": "Indicator", "name": "Unemployment rate", "unitOfMeasure": "percentage"}
  ],
  "relationships": [
    {"from": "G1", "to": "T1", "type": "hasTarget"},
    {"from": "T1", "to": "I1", "type": "isMeasuredBy"},
    {"from": "G2", "to": "T2", "type": "hasTarget"},
    {"from": "T2", "to": "I2", "type": "isMeasuredBy"},
    {"from": "G3", "to": "T3", "type": "hasTarget"},
    {"from": "T3", "to": "I3", "type": "isMeasuredBy"},
    {"from": "G1", "to": "G2", "type": "relatesTo"},
    {"from": "G1", "to": "G3", "type": "relatesTo"},
    {"from": "G2", "to": "G3", "type": "relatesTo"}
  ]
}"""


CONTEXT_ITERATIVE = (
    """You are an intelligent agent with access to a sustainability knowledge graph (KG).
Your task is to analyze a product chunk and identify related sustainability goals, targets, and indicators.

You have access to following tools:

{tools}

Instructions:

1. Identify key concepts/entities in the chunk.

2. Query the KG (internally) to find related sustainability goals and targets.

3. Reason step-by-step (chain-of-thought) why each goal is relevant.

4. Store a memory entry with the following format:

Memory Entry:

Chunk ID: {chunk_id}

Key Concepts: <list>

Related entities: <list>

"""
    + _REACT_FORMAT
)


CONTEXT_SYNTHESIS = (
    """You have processed multiple product chunks and stored intermediate memory entries.

Memory Entries:

{memory_entries}

Task:

Provide a final synthesis of all relevant sustainability goals.

For each goal, include:

- Related targets/indicators

- Interdependencies with other goals

Output in the following structured format:

Final Sustainability Goal Analysis:

Goal : <Goal Name>

  Related Targets/Indicators: <list>

  Interdependencies: <list>

"""
    + _REACT_FORMAT
)


SR_DERIVATION = (
    """You are an intelligent agent that selects sustainability requirements for a software product from a requirements taxonomy.
Your task is to analyze a product chunk and nominate the taxonomy entries the product must take into account.

You have access to following tools:

{tools}

Instructions:

1. Identify the sustainability themes raised by the chunk.

2. Use the context retriever to recall the sustainability goals, targets and indicators already derived for this product.

3. Use the taxonomy retriever to find semantically related sustainability requirements.

4. Nominate taxonomy entries by their record id, exactly as shown in brackets in the retriever results. Only bracketed record ids are collected from your final answer.

5. Give a short reasoning why the nominated entries apply to this product.

Expert feedback:

{feedback}

Your final answer must use the following format:

Memory Entry:

Chunk ID: {chunk_id}

Nominated entries: <record ids>

Reasoning: <why these apply>

"""
    + _REACT_FORMAT
)


_RELATION_OUTPUT_BLOCK = """Relation Type must be exactly one of Positive, Negative or Neutral. Commit to one; put any nuance in the Reason. Neutral means no material influence either way.

The output format should be

Requirement 1:

Requirement 2:

Relation Type:

Reason:

"""


RELATION_MIXED = (
    """You are an AI assistant for requirements analysis. You will help to identify potential conflicts or positive dependencies among the following pairs of requirements specifications.

You have access to the following tools:

{tools}

The tools return following relevant information-

1. Dependency category information among requirements.

2. Conflict information about different sustainability category. If sustainability category does not match the query generate result based on your own input.

3. Conflict information about different NFR category. If NFR category does not match the query generate result based on your own input.

You may use one or more tools for generating your answer.

Here are some examples of correlations (positive or negative) among functional and sustainability requirements-

FR1: The system shall optimize server workload distribution to improve performance.
SR1: The system should minimize energy consumption of computing resources.
Correlation: Positive - load balancing improves energy efficiency, supporting sustainability.

FR2: The DigitalHome shall allow monitoring of electricity consumption of each device.
SR2: The system should promote energy savings by providing users feedback on consumption.
Correlation: Positive - monitoring enables user awareness and energy-saving actions.

FR3: The system shall enable remote access to home appliances.
SR3: The system should reduce unnecessary travel for household management.
Correlation: Positive - remote control avoids physical travel, reducing carbon footprint.

FR4: The system shall store high-resolution logs of all user interactions for 2 years.
SR4: The system should minimize data storage and reduce resource usage.
Correlation: Negative - long-term data storage conflicts with resource efficiency.

FR5: The system shall provide real-time video surveillance accessible from anywhere.
SR5: The system should minimize network bandwidth consumption.
Correlation: Negative - real-time video streaming consumes significant bandwidth.

FR6: The application shall provide instant AI recommendations by continuously running inference models in the background.
SR6: The system should reduce energy usage of computational processes.
Correlation: Negative - continuous inference increases energy consumption.

NFR1: The system shall achieve 99% uptime availability.
SR1: The system should ensure reliable access to services to reduce resource waste from repeated retries.
Correlation: Positive - higher availability reduces redundant retries and wasted energy.

NFR2: The application shall respond to user requests within 2 seconds.
SR2: The system should optimize processing to minimize CPU cycles and energy use.
Correlation: Positive - faster response times can be achieved via optimized algorithms that also save energy.

NFR3: The system shall support modular architecture.
SR3: The system should extend product lifecycle by allowing upgrades instead of replacements.
Correlation: Positive - modularity enables sustainable upgrades, reducing e-waste.

NFR4: The system shall maintain logs with detailed debug information at all times.
SR4: The system should minimize storage requirements and energy used for data management.
Correlation: Negative - continuous logging increases storage and energy demands.

NFR5: The system shall support ultra-high availability with full data replication across five regions.
SR5: The system should minimize infrastructure footprint and energy use.
Correlation: Negative - more replication for uptime increases infrastructure and carbon emissions.

NFR6: The system shall provide 4K video streaming quality by default.
SR6: The system should minimize network bandwidth consumption.
Correlation: Negative - default high-resolution streaming increases bandwidth and energy usage.

NFR7: The system shall encrypt all data in transit and at rest.
SR7: The system should minimize computational overhead and energy usage.
Correlation: Negative - encryption improves security but increases CPU load unless optimized ciphers are used; commit to the dominant effect.

NFR8: The system shall automatically scale resources based on user demand.
SR8: The system should reduce idle resource consumption.
Correlation: Positive - scaling down resources during low usage reduces idle consumption; unbounded scale-up must be constrained.

"""
    + _RELATION_OUTPUT_BLOCK
    + _REACT_FORMAT
)


RELATION_SUSTAINABILITY = (
    """You are an AI assistant for requirements analysis. You will help to identify potential conflicts or positive dependencies among the following pairs of sustainability requirements specifications.

You have access to the following tool:

{tools}

The tool returns the following relevant information-

1. Conflict information about different sustainability category. If sustainability category does not match the query generate result based on your own input.

Here are some examples of correlations (positive or negative) among sustainability requirements-

SR1 (Energy Efficiency): The system should minimize energy consumption of computing resources.
SR2 (Cost Efficiency): The system should reduce operational costs by optimizing infrastructure usage.
Correlation: Positive - lowering energy use also reduces electricity costs.

SR3 (Accessibility): The system should provide services accessible via low-bandwidth networks.
SR4 (Inclusiveness): The system should ensure equal access in developing regions with limited infrastructure.
Correlation: Positive - supporting low-bandwidth directly improves accessibility in underserved regions.

SR5 (Data Retention): The system should store all user data for transparency and accountability.
SR6 (Resource Efficiency): The system should minimize storage usage and reduce data center energy demand.
Correlation: Negative - long-term data retention conflicts with minimizing storage and energy consumption.

SR7 (High Availability): The system should ensure 99.99% uptime with global server replication.
SR8 (Environmental Impact): The system should reduce carbon footprint by minimizing hardware and infrastructure.
Correlation: Negative - more replication for uptime increases infrastructure and carbon emissions.

"""
    + _RELATION_OUTPUT_BLOCK
    + _REACT_FORMAT
)


REVISION_OPTIMIZER = """You are an expert requirements engineer and sustainability analyst.

You will be given:

- A requirement A (Functional Requirement - FR - or Non-Functional Requirement - NFR).

- A Sustainability Requirement B (SR).

Requirement A ({requirement_type}): {requirement_a}

Sustainability Requirement B: {sustainability_requirement}

Other sustainability requirements that conflict with B and are also associated with A (the revised A must keep a positive correlation with all of them):

{conflicting_relations}

Analyst feedback from earlier review rounds:

{feedback}

Situation: Requirement A as written negatively impacts SR B.

Your goal: Revise requirement A so the negative impact on SR B is removed or substantially reduced, while preserving the original meaning, objective, and acceptance criteria of A.

Use the following steps:

1. Parse and classify A (FR or NFR). Identify core intent and success criteria.

2. Parse SR: identify sustainability objectives B.

3. Identify nature of conflict between A and B.

4. Generate 3 candidate revisions:

   - Minimal tweak (light modification)

   - Moderate change (introduce constraints/optimizations)

   - Alternative approach (different design achieving same objective)

5. For each: derive measurable acceptance criteria + risks.

6. Score each candidate on preservation, SR impact reduction, confidence.

7. Select recommended candidate + justify.

Output in following JSON format:

{
  "original_requirement": "<text>",
  "requirement_type": "FR|NFR",
  "sustainability_requirement": "<text>",
  "candidates": [
    {
      "label": "Minimal",
      "revised_requirement": "<text>",
      "preservation_score": <0-100>,
      "estimated_SR_impact_reduction": "<Low|Medium|High or %>",
      "confidence": "<Low|Medium|High>",
      "acceptance_criteria": ["criterion 1", "criterion 2"],
      "residual_risks": ["risk 1"]
    },
    { "label": "Moderate", ... },
    { "label": "Alternative", ... }
  ],
  "recommended": {
    "revised_requirement": "<text>",
    "justification": "<brief>"
  }
}"""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str
    placeholders: frozenset[str]


_TEMPLATES: dict[str, PromptTemplate] = {}


def _register(template_id: str, text: str, placeholders: set[str]) -> None:
    _TEMPLATES[template_id] = PromptTemplate(template_id, text, frozenset(placeholders))


_register("graph_extraction", GRAPH_EXTRACTION, {"document"})
_register(
    "context_iterative",
    CONTEXT_ITERATIVE,
    {"tools", "tool_names", "chunk_id", "input", "agent_scratchpad"},
)
_register(
    "context_synthesis",
    CONTEXT_SYNTHESIS,
    {"memory_entries", "tools", "tool_names", "input", "agent_scratchpad"},
)
_register(
    "sr_derivation",
    SR_DERIVATION,
    {"tools", "tool_names", "chunk_id", "feedback", "input", "agent_scratchpad"},
)
_register(
    "relation_mixed",
    RELATION_MIXED,
    {"tools", "tool_names", "input", "agent_scratchpad"},
)
_register(
    "relation_sustainability",
    RELATION_SUSTAINABILITY,
    {"tools", "tool_names", "input", "agent_scratchpad"},
)
_register(
    "revision_optimizer",
    REVISION_OPTIMIZER,
    {
        "requirement_a",
        "requirement_type",
        "sustainability_requirement",
        "conflicting_relations",
        "feedback",
    },
)

# Any of these appearing un-substituted in a rendered prompt is a bug,
# regardless of which template produced it.
_KNOWN_PLACEHOLDERS = frozenset().union(*(t.placeholders for t in _TEMPLATES.values()))
_LEFTOVER = re.compile(r"\{(" + "|".join(sorted(_KNOWN_PLACEHOLDERS)) + r")\}")


def get_template(template_id: str) -> PromptTemplate:
    try:
        return _TEMPLATES[template_id]
    except KeyError:
        raise UnknownTemplate(f"no template {template_id!r}") from None


def template_ids() -> list[str]:
    return sorted(_TEMPLATES)


def render_prompt(template_id: str, variables: dict[str, str]) -> str:
    """Render a template byte-deterministically.

    Every declared placeholder must be bound; unknown variables are ignored.
    Substitution is single-pass (variable content is never re-scanned), and
    a known placeholder in the template body that the template did not
    declare is an error, so no prompt ever reaches a provider with an
    unsubstituted placeholder.
    """
    template = get_template(template_id)
    missing = sorted(p for p in template.placeholders if p not in variables)
    if missing:
        raise UnboundPlaceholder(
            f"template {template_id!r}: unbound placeholder(s) {', '.join(missing)}"
        )
    stray = sorted(
        {
            m.group(1)
            for m in _LEFTOVER.finditer(template.text)
            if m.group(1) not in template.placeholders
        }
    )
    if stray:
        raise UnboundPlaceholder(
            f"template {template_id!r}: undeclared placeholder(s) {', '.join(stray)}"
        )
    pattern = re.compile(
        r"\{(" + "|".join(re.escape(p) for p in sorted(template.placeholders)) + r")\}"
    )
    return pattern.sub(lambda m: str(variables[m.group(1)]), template.text)
