"""
Streamlit UI Utilities
=====================
Reusable UI helpers for the PHKG viewer: session state, answer history,
sidebar and question controls.
"""

from typing import Optional

import streamlit as st

from core.competency import CompetencyAnswer


# -------------------------
# Session state helpers
# -------------------------

def initialize_session():
    """
    Initialize all required Streamlit session variables.
    """
    st.session_state.setdefault("answers", [])
    st.session_state.setdefault("graph_ready", False)
    st.session_state.setdefault("graph_name", None)


# -------------------------
# Answer history
# -------------------------

def render_answers():
    """
    Render answered questions, newest last.
    """
    for entry in st.session_state.answers:
        with st.chat_message("user"):
            st.markdown(entry["question"])
        with st.chat_message("assistant"):
            render_answer(entry["answer"])


def render_answer(answer: dict):
    verdict = answer["verdict"]
    if isinstance(verdict, list):
        if verdict:
            st.markdown("\n".join(f"- {item}" for item in verdict))
        else:
            st.markdown("_Nothing to list._")
    else:
        st.markdown(f"**{verdict}**")

    st.caption(answer["explanation"])
    if answer["bindings"]:
        with st.expander("Supporting bindings"):
            st.json(answer["bindings"])


def append_answer(question: str, answer: CompetencyAnswer):
    st.session_state.answers.append({"question": question, "answer": answer.to_dict()})


def reset_answers():
    st.session_state.answers = []


# -------------------------
# Inputs
# -------------------------

def graph_uploader():
    """
    Display the PHKG upload widget.
    """
    return st.file_uploader(
        label="Load a reasoned PHKG (Turtle)",
        type=["ttl"],
        accept_multiple_files=False,
        help="Output of the `reason` or `pipeline` command",
    )


def question_params(question_id: str) -> dict:
    """Extra inputs for the parameterized food questions."""
    if question_id == "allergy-rec":
        return {"allergen": st.text_input("Allergen", value="dairy")}
    if question_id == "substitute-rec":
        return {"item": st.text_input("Item to replace", value="almonds")}
    return {}


# -------------------------
# Sidebar layout
# -------------------------

def render_sidebar(constraints: Optional[dict] = None):
    with st.sidebar:
        st.markdown("### PHKG Viewer")
        st.caption("Ask competency questions about a personal health knowledge graph.")

        st.divider()

        st.markdown("#### Loaded graph")
        if st.session_state.graph_name:
            st.markdown(st.session_state.graph_name)
        else:
            st.caption("No graph loaded yet")

        if constraints:
            st.markdown("#### Active constraints")
            st.json(constraints)

        st.divider()

        if st.button("Clear answers", use_container_width=True):
            reset_answers()
            st.rerun()


def show_status(message: str, level: str = "info"):
    """
    Display a status message.
    """
    if level == "success":
        st.success(message)
    elif level == "warning":
        st.warning(message)
    elif level == "error":
        st.error(message)
    else:
        st.info(message)
