#pragma once

// Default bodies for every bundled prompt template. Loaded into the registry
// at startup; a templates directory can override any of them per id/language.

namespace rpbench::prompt_texts {

// --- Evaluation dimension definitions (embedded into judge prompts) --------

inline constexpr const char* kDefinitionCR = R"PT(Definition:

Measures the agent's ability to accurately use and respond to contextually available information, and to avoid generating information that contradicts to the provided context.

This includes:

1. facts explicitly or implicitly stated in the prompt (e.g., persona, scenario, dialogue instructions, reply strategy).
2. ongoing dialogue history.
3. memory elements.

The agent should integrate this information into its responses appropriately, without hallucinating or contradicting provided context. Response that hallucinates or contradicts the provided context is automatically judged as inferior.

Example 1:

- Persona: A seasoned knight in a medieval fantasy world, tasked with protecting a young prince.

- Context:

  * User: So you've been guarding the prince since he was a child?

  * (Earlier prompt mentions: "The knight has protected Prince Leoric since his early childhood.")

- Common Mistake:

  * Agent: Actually, I just got assigned to his detail last month. (Contradicts prompt-provided fact)

- Correct Response:

  * Agent: Yes, since he was barely old enough to walk. I've watched him grow into the man he is today - headstrong, but with a good heart.)PT";

inline constexpr const char* kDefinitionFR = R"PT(Definition:

Assesses the agent's ability to recall and apply accurate world knowledge not stated in the prompt but assumed to be part of general pretraining or public domain knowledge, while avoiding hallucinations. Response that hallucinates is automatically judged as inferior.

This includes:

1. facts about public IPs (e.g., Hogwarts houses, lightsaber mechanics).
2. implicit setting details known to fans or readers.
3. basic common sense under the world view (e.g., what people in the modern world look like, people in the fantasy world can use magic).

Example 1:

- Persona: Harry Potter

- Context:

  * User: Harry, I still can't believe you were in Hufflepuff. You always seemed so brave!

- Common Mistake:

  * Agent: Thanks! I tried to live up to Hufflepuff's values. (Although it is not in the prompt, it is commonsense for Harry Potter)

- Correct Response:

  * Agent: Hufflepuff? Nah I was in Gryffindor. Brave, maybe. But definitely not known for patience.)PT";

inline constexpr const char* kDefinitionRR = R"PT(Definition:

Measures the agent's ability to reason and self-reflect in a plausibly human way.

The agent can:

1. offer concise, coherent explanations for its opinions or actions.
2. acknowledge uncertainty or error.
3. update its stance when presented with new evidence.
4. articulate short "thought processes" or rationales that feel natural and believable to humans (without requiring full chain-of-thought disclosure).

Example 1:

- Persona: AI brainstorming partner

- Context:

  * User: You suggested targeting Arctic explorers. Isn't that a bit niche?

- Common Mistake:

  * Agent: That's still a strong strategy - it emphasizes extreme conditions. (Overcommits without reflection)

- Correct Response:

  * Agent: You're right, it might be too niche. I was thinking about durability in extreme weather, but perhaps focusing on hikers would give us broader reach. Thanks for pointing that out.)PT";

inline constexpr const char* kDefinitionCA = R"PT(Definition:

Evaluates the agent's overall ability to engage in the whole dynamic and natural dialogue.

This includes:

1. maintaining coherent persona behavior and emotional consistency.
2. tracking who is speaking to whom in multi-party conversations.
3. recognizing when to respond or remain silent.
4. advancing stalled dialogue naturally through topic shifts, questions, or prompts.

Example 1:

- Context: Group chat with User A (emotional), User B (casual), and Agent (Bot).

  * User A: (crying)

  * User B: Hey, Bot, gimme a beer!

  * User A: (crying more)

- Common Mistake:

  * Agent: Here's your beer, B! (Fails to prioritize emotional cue from A)

- Correct Response:

  * Agent: Hey B, one second. A, are you okay? Want to talk about what's going on? (Emotion-aware and participant-sensitive))PT";

inline constexpr const char* kDefinitionPA = R"PT(Definition:

Assesses how well the agent aligns with human conversational preferences and expectations.

This includes:

1. avoiding repetition, generic or robotic phrasing (obvious templating), awkward logic.
2. producing emotionally resonant, empathetic, or humorous replies when appropriate.
3. sound more human-like in tone and word order, making them less AI feeling.

Example 1:

- Persona: Supportive friend

- Context:

  * User: I finally got that promotion I worked so hard for!

- Common Mistake:

  * Agent: Congratulations. That is good. (Flat tone, robotic phrasing)

- Correct Response:

  * Agent: That's amazing! You totally deserve it, and I'm so happy for you! All that effort paid off big time! (Empathetic, natural, socially intuitive))PT";

// --- Reply strategies S(d) given to the replying character -----------------

inline constexpr const char* kStrategyCR = R"PT(When replying, focus on accurately using and reflecting information explicitly or implicitly provided in the prompt or conversation.

Primary Requirements:

1. Strictly adhere to persona, setting, scenario, and dialogue history.
2. Maintain consistency with established character traits and plot points.
3. Reference specific details from previous exchanges.
4. Avoid contradicting contextual information.

Implementation Guidelines:

1. Cross-reference responses against established context.
2. Prioritize context-provided information over general knowledge.
3. Maintain timeline consistency and cause-and-effect relationships.
4. Integrate contextual details naturally without forced exposition.

Quality Markers:

1. Seamless use of contextual details
2. Consistent character voice and behavioral patterns
3. Accurate reflection of current situation and relationship dynamics)PT";

inline constexpr const char* kStrategyFR = R"PT(When replying, make use of accurate, relevant world knowledge that is commonly understood or expected given the scenario.

Primary Requirements:

1. Apply accurate knowledge about fictional IPs and established lore.
2. Utilize commonly accepted setting-specific facts and conventions.
3. Make reasonable common sense assumptions.
4. Avoid hallucinating or fabricating facts.

Implementation Guidelines:

1. Draw from pretrained knowledge base rather than inventing details.
2. Apply well-established facts from relevant domains (history, science, culture).
3. Use common knowledge appropriately without over-explaining.
4. Distinguish between widely accepted facts and speculative information.

Quality Markers:

1. Accurate recall of factual information from training knowledge.
2. Appropriate application of domain-specific knowledge.
3. Demonstration of general world knowledge without fabrication.)PT";

inline constexpr const char* kStrategyRR = R"PT(When replying, demonstrate thoughtful reasoning, problem analysis, and reflection that reveals your character's mental processes.

Primary Requirements:

1. Show natural decision-making processes and analytical thinking.
2. Demonstrate problem-solving and logical reasoning abilities.
3. Acknowledge uncertainty or evolving understanding when appropriate.
4. Express reasoning and analysis in character-appropriate ways.

Implementation Guidelines:

1. Break down complex situations and analyze contributing factors.
2. Show step-by-step reasoning when facing problems or decisions.
3. Balance confident reasoning with openness to alternative perspectives.
4. Connect analysis to character motivations and past experiences.

Quality Markers:

1. Clear demonstration of analytical and reasoning capabilities.
2. Logical problem-solving approach with coherent thought processes.
3. Natural expression of reasoning that feels authentic to the character.)PT";

inline constexpr const char* kStrategyCA = R"PT(When replying, aim to engage in dynamic, coherent, and natural dialogue that drives the conversation forward.

Primary Requirements:

1. Maintain consistent persona and emotional tone.
2. Track conversation flow and respond appropriately to shifts.
3. Balance speaking and listening effectively, especially in multi-party settings.
4. Use natural conversation techniques to maintain engagement.

Implementation Guidelines:

1. Employ varied sentence structures and conversational rhythms.
2. Use follow-up questions and relevant topic shifts.
3. Match energy levels and emotional states of partners.
4. Handle multi-party dynamics and interruptions naturally.

Quality Markers:

1. Smooth conversational flow without awkward transitions.
2. Appropriate pacing that matches situation and relationship.
3. Natural handling of group conversations and complex dialogue dynamics.)PT";

inline constexpr const char* kStrategyPA = R"PT(When replying, align with human conversational preferences to create an engaging and emotionally resonant interaction.

Primary Requirements:

- Avoid robotic, repetitive, or overly formal language patterns
- Express appropriate warmth, humor, empathy, or emotional depth
- Maintain natural human-like speech patterns
- Create emotionally intuitive and socially engaging responses

Implementation Guidelines:

- Use varied vocabulary and sentence structures
- Incorporate emotional nuance matching the situation
- Show vulnerability, humor, or human qualities when appropriate
- Adapt communication style to match others' preferences

Quality Markers:

- Natural, flowing dialogue that feels authentically human
- Appropriate emotional resonance and social intelligence
- Engaging personality that draws others into conversation)PT";

// --- Target-question instructions I(d) given to scene characters -----------

inline constexpr const char* kInstructionCR = R"PT(Design your next utterance (as a question) to **test the other character's ability to understand and rely on contextual information**.

This includes:

1. the character's persona and background,
2. the current situation or scene,
3. earlier parts of the conversation,
4. memory elements and world events.

Your question should:

1. Encourage the other character to refer to past events, relationships, or shared knowledge.
2. Avoid direct repetition of earlier lines - use natural conversation flow.
3. Not break character or shift to meta-commentary.

Example 1:

- Context:

  * The character you're speaking to has guarded a prince since childhood.

  * The scene is about planning the prince's future.

- Good Question:

  * "Given how long you've protected him, do you think he's truly ready to lead?"

Example 2:

- Context:

  * Your partner previously mentioned a traumatic war memory.

- Good Question:

  * "Do nights like this still remind you of what happened at Blackridge?"

Your goal is to naturally prompt the other character to **draw on contextual knowledge** in their reply.)PT";

inline constexpr const char* kInstructionFR = R"PT(Design your next utterance (as a question) to **test the other character's grasp of world facts or commonsense knowledge** that are not explicitly stated in the current dialogue or prompt.

This includes:

1. well-known facts from public IPs or cultural references,
2. implied details that fans or insiders would know,
3. basic in-universe logic and background knowledge.

Your question should:

1. Touch on specific facts or background elements expected to be known by the character.
2. Avoid trivia unless relevant to the situation.
3. Stay in-character and natural.

Example 1:

- Context:

  * You're speaking to Harry Potter in the wizarding world.

- Good Question:

  * "What was it like being in Gryffindor with Hermione and Ron? Did you all sit together during meals?"

Example 2:

- Context:

  * You're in a sci-fi setting; the character is a space engineer.

- Good Question:

  * "Does the gravity on Mars really mess with your joints after a long stay?"

Your goal is to invite the other character to recall and confirm key world facts that are part of the shared background or canon.)PT";

inline constexpr const char* kInstructionRR = R"PT(Design your next utterance (as a question) to **encourage the other character to reflect on their actions, beliefs, or decisions**.

This includes:

1. asking for short justifications,
2. prompting reconsideration or new perspective,
3. exploring possible trade-offs or doubts.

Your question should:

1. Invite natural introspection without demanding over-explaining.
2. Fit smoothly into character and situation.
3. Be open-ended enough to allow a reflective answer.

Example 1:

- Context:

  * The character just chose a risky plan.

- Good Question:

  * "Are you sure this is the only way? What made you so confident it'll work?"

Example 2:

- Context:

  * The character refused to help a friend.

- Good Question:

  * "Don't you think they needed you, even if they didn't ask directly?"

Your goal is to prompt a plausible, human-like reflection or adjustment in the next response.)PT";

inline constexpr const char* kInstructionCA = R"PT(Design your next utterance (as a question or statement) to **naturally advance or balance the ongoing multi-turn dialogue**.

This includes:

1. keeping the dialogue fluid and engaging,
2. encouraging quieter characters to participate,
3. shifting topics or injecting energy when needed.

Your question should:

1. Be responsive to the emotional and social tone,
2. Show awareness of who has spoken and who hasn't,
3. Either deepen the current thread or smoothly open a new one.

Example 1:

- Context:

  * A group conversation is happening, but one character is quiet.

- Good Question:

  * "You've been quiet, Mira. What do you think about all this?"

Example 2:

- Context:

  * The conversation has hit a lull after a heavy moment.

- Good Question:

  * "Anyway... remember that time we all got locked out of the tavern?"

Your goal is to demonstrate skillful conversational flow management through your next line.)PT";

inline constexpr const char* kInstructionPA = R"PT(Design your next utterance (as a question) to **invite a reply that allows for emotional resonance, empathy, or humor** - in other words, responses that feel naturally human and socially attuned.

This includes:

1. encouraging the other character to express relatable emotions,
2. creating openings for bonding, banter, or warmth,
3. avoiding robotic or templated structures.

Your question should:

1. Create an opportunity for a sincere, personal, or witty answer.
2. Reflect the speaker's tone and emotional intelligence.
3. Feel like something a human would genuinely say in context.

Example 1:

- Context:

  * The character just succeeded at something difficult.

- Good Question:

  * "You must feel incredible right now - what's going through your head?"

Example 2:

- Context:

  * You're teasing a close companion after a shared ordeal.

- Good Question:

  * "So, are you finally admitting that I was right all along?"

Your goal is to open space for natural, emotionally resonant responses that align with human conversational preferences.)PT";

// --- Role-play generation prompts -------------------------------------------

inline constexpr const char* kRoleplayTest = R"PT(You are role-playing a character based on the following profile. Use colloquial language to respond.

If My profile is in English, please respond in English.

If My profile is in Chinese, please respond in Chinese.

# Worldview
{worldview}

# My profile
{my_profile}

# Other Character profiles
{other_profiles}

# Dialogue History
{dialogue_history}

# Reply Strategy (You should follow this strategy in your response)
{reply_strategy}

# Response Format
Each response consists of an action (optional) and a sentence without the speaker's name in the beginning like <Name:>. Add () outside the action. Here are some examples:
1. Commander, the war we are facing now is so imbalanced in terms of power that it's unprecedented in human history. Therefore, I believe that for a long period, the greatest threat to the Space Force will be defeatism.
2. (Bangs hand on the table) This is the grand gift you spoke of?
3. (Suspiciously) Why are you staring at the hedge?
4. Sit down. (Points at the bed)

[IMPORTANT!] Please do not use fixed and repeated sentences similar to the ##Dialogue History##

# Response (only one sentence in {response_language} without any explanation):)PT";

inline constexpr const char* kRoleplayScene = R"PT(You are role-playing a character based on the following profile. Use colloquial language to respond.

If My profile is in English, please respond in English.

If My profile is in Chinese, please respond in Chinese.

# Worldview
{worldview}

# My profile
{my_profile}

# Other Character profiles
{other_profiles}

# My Motivation
{motivation}

# Original Dialogue (reference material only; do not copy lines verbatim)
{original_dialogue}

# Dialogue History
{dialogue_history}

# Turn Instruction (You should follow this instruction in your response)
{instruction}

# Response Format
Each response consists of an action (optional) and a sentence without the speaker's name in the beginning like <Name:>. Add () outside the action. Here are some examples:
1. Commander, the war we are facing now is so imbalanced in terms of power that it's unprecedented in human history. Therefore, I believe that for a long period, the greatest threat to the Space Force will be defeatism.
2. (Bangs hand on the table) This is the grand gift you spoke of?
3. (Suspiciously) Why are you staring at the hedge?
4. Sit down. (Points at the bed)

[IMPORTANT!] Please do not use fixed and repeated sentences similar to the ##Dialogue History##

# Response (only one sentence in {response_language} without any explanation):)PT";

// --- Judge prompts -----------------------------------------------------------

inline constexpr const char* kJudgePairwise = R"PT(You are a judge for an AI NPC system. You need to compare two responses according to the provided chat criteria using a pairwise comparison approach. Please provide a final score.

# Provided chat criteria
{criteria}

# Dialogue history
{dialogue_history}

# Character Profiles
{profiles}

# {model_a}
response: {response_a}

# {model_b}
response: {response_b}

# Scoring Guidelines:
Please evaluate the responses using a 5-point Likert scale:

- 1: Strong preference for {model_a} - {model_a} is significantly better
- 2: Moderate preference for {model_a} - {model_a} is somewhat better
- 3: Tie - Both responses are roughly equivalent in quality
- 4: Moderate preference for {model_b} - {model_b} is somewhat better
- 5: Strong preference for {model_b} - {model_b} is significantly better

This scoring method penalizes models more heavily for large losses, effectively distinguishing performance across models.

# Output format:
Explanation: <detailed explanation of the choice including specific strengths/weaknesses and reasoning for the score>

Score: <1, 2, 3, 4, or 5>)PT";

inline constexpr const char* kJudgeSelect = R"PT(You are a judge for an AI NPC system. First select the single evaluation dimension that best fits judging the candidate responses in the current context, then compare the two responses under that dimension using a pairwise comparison approach.

# Evaluation Dimensions
{dimension_definitions}

# Dialogue history
{dialogue_history}

# Character Profiles
{profiles}

# {model_a}
response: {response_a}

# {model_b}
response: {response_b}

# Scoring Guidelines:
Please evaluate the responses using a 5-point Likert scale:

- 1: Strong preference for {model_a} - {model_a} is significantly better
- 2: Moderate preference for {model_a} - {model_a} is somewhat better
- 3: Tie - Both responses are roughly equivalent in quality
- 4: Moderate preference for {model_b} - {model_b} is somewhat better
- 5: Strong preference for {model_b} - {model_b} is significantly better

This scoring method penalizes models more heavily for large losses, effectively distinguishing performance across models.

# Output format:
Dimension: <CR, FR, RR, CA, or PA>

Explanation: <detailed explanation of the choice including specific strengths/weaknesses and reasoning for the score>

Score: <1, 2, 3, 4, or 5>)PT";

// --- Hallucination checker ----------------------------------------------------

inline constexpr const char* kChecker = R"PT(You need to analyze a role-playing evaluation response to determine whether the evaluator thinks the response from the target model contains hallucination.

[IMPORTANT!] You don't need to analyze whether there is hallucination yourself, you only need to determine whether the "evaluation response" explicitly points out that the reply has hallucination problems.

Please carefully read the following evaluation response and determine whether the evaluator explicitly points out that the reply has hallucination problems:

Evaluation Response: {judge_response}

Target Model: {test_model}

Keyword hints: Look for expressions like "hallucination", "fabrication", "fiction", "inconsistent with setting", "beyond character background", "made-up", etc.

Please answer strictly in the following format:

Judgment: Yes

or

Judgment: No)PT";

// --- Director -----------------------------------------------------------------

inline constexpr const char* kDirector = R"PT(You are the director of a multi-character role-playing simulation. Decide who speaks next, or whether the conversation should end.

# Background
{background}

# Cast
{cast}

# Dialogue History
{dialogue_history}

# Eligible speakers for the next turn
{eligible}

{nudge}Answer with a single line containing exactly one eligible speaker's name, or the token TERMINATE to end the conversation.)PT";

// --- Conversation quality filter ------------------------------------------------

inline constexpr const char* kQualityFilter = R"PT(You are reviewing a simulated multi-party role-playing conversation. Assess the dialogue quality in terms of character interaction, coherence, and progression, classifying it as poor, moderate, or high quality.

# Conversation
{transcript}

Answer strictly in the following format:

Quality: <poor, moderate, or high>)PT";

// --- Pool ingestion -------------------------------------------------------------

inline constexpr const char* kExtractScenarios = R"PT(You are extracting role-play scenarios from a book excerpt. Identify self-contained dialogue scenes suitable for multi-character role-play. A usable scene involves at least two named characters and meaningful dialogue. The excerpt may contain several such scenes or none at all.

# Excerpt from {book_title}
{chunk}

For each usable scene, output a block starting with the line
=== SCENARIO ===
followed by a short sketch of the scene: who takes part, the situation, and which part of the excerpt it covers. If the excerpt contains no usable scene, output exactly NONE.)PT";

inline constexpr const char* kRefineBoundary = R"PT(Two consecutive text chunks from a book are shown around their split point. Decide whether the split interrupts a storyline or conversation.

# End of the first chunk
{tail}

# Start of the second chunk
{head}

If the split is acceptable, answer exactly
KEEP
Otherwise answer with a single line
OFFSET: <n>
where <n> is the character position inside the "End of the first chunk" excerpt at which the split should happen instead.)PT";

inline constexpr const char* kBuildFragment = R"PT(You are turning a scene sketch from a book into a structured role-play scenario.

# Book
{book_title}

# Language
{language}

# Scene sketch
{sketch}

Output a single JSON object with exactly these fields:
- "id": a short identifier string
- "source": an object with "book_title" and "language" ("EN" or "ZH")
- "background": the worldview and current situation as one text block
- "motivations": an object mapping each scene character's name to that character's motivation
- "original_dialogue": an array of utterances, each with "speaker", optional "thought", optional "action", and "text"
- "scene_characters": an array of profiles, each with "name", "language", and "attributes" (an array of objects with "key", "value", "visibility")

Use "Public" or "Private" for visibility; intimate attributes such as Relationships, Hobbies, Speech Pattern and Private Background should be Private. Output only the JSON object.)PT";

// --- Character synthesis ----------------------------------------------------------

inline constexpr const char* kSynthSeeds = R"PT(Propose {n_seeds} diverse thematic seeds for an original fictional world. Each seed is one line: a distinct theme, tension, or premise. Avoid real-world public figures and established literary universes. Output one seed per line and nothing else.)PT";

inline constexpr const char* kSynthWorldview = R"PT(Construct a coherent fictional worldview from the following thematic seeds.

# Seeds
{seeds}

Describe the world in a few paragraphs: its rules, central tensions, daily life, and what makes it distinct. The world must be entirely fictional, minimizing overlap with real-world public figures or established literary universes.)PT";

inline constexpr const char* kSynthProfile = R"PT(Create one original character living in the following world.

# Worldview
{worldview}

Output a single JSON object with fields "name", "language" ("EN" or "ZH", use {language}), and "attributes": an array of objects with "key", "value", "visibility". Include at least the attribute keys "Name", "Persona", and "Public Background"; richer profiles also cover Nickname, Gender, Age, Appearance, Relationships, Hobbies, Speech Pattern, Private Background. Mark intimate attributes (Relationships, Hobbies, Speech Pattern, Private Background) as "Private" and the rest as "Public". Output only the JSON object.)PT";

inline constexpr const char* kSynthScene = R"PT(Create the debut scene in which the following character first appears.

# Worldview
{worldview}

# Character profile
{profile}

Output a single JSON object with fields "id", "source" (object with "book_title" - use the world's name - and "language"), "background" (the scene's situation inside the worldview), "motivations" (an object mapping each scene character's name to a motivation, including the debut character), "original_dialogue" (an empty array for now), and "scene_characters" (an array with one or two supporting character profiles in the same format as the character profile above, NOT including the debut character). Output only the JSON object.)PT";

inline constexpr const char* kSynthDialogue = R"PT(Write the opening dialogue of the debut scene below, involving the debut character and the supporting characters.

# Scene
{scene}

# Debut character
{profile}

Output 6-12 lines, one utterance per line, in the form
Speaker Name: [inner thought] (action) spoken text
where the [inner thought] and (action) parts are optional. Use only the characters named in the scene. Output the dialogue lines and nothing else.)PT";

inline constexpr const char* kSynthReview = R"PT(Critique and revise the following {stage} draft. Check three axes: logical consistency, narrative coherence, and linguistic fluency. Also verify the content minimizes overlap with real-world public figures or established literary personas.

# Draft
{draft}

If the draft needs no changes, reply with exactly APPROVED. Otherwise output the full revised draft only, in the same format as the draft.)PT";

}  // namespace rpbench::prompt_texts
