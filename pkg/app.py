"""
PHKG Viewer
===========
Streamlit entry point for browsing a reasoned personal health knowledge
graph through its competency questions.
"""

import streamlit as st

from config.settings import settings
from core.errors import PHKGError
from ui.components import (
    initialize_session,
    render_answers,
    append_answer,
    render_sidebar,
    graph_uploader,
    question_params,
    show_status,
)
from ui.chat_interface import QuestionController


# -------------------------
# App configuration
# -------------------------

st.set_page_config(
    page_title="PHKG Viewer",
    layout="wide",
    initial_sidebar_state="expanded",
)

st.markdown(
    """
    <style>
        .block-container {
            padding-top: 1rem;
            max-width: 1100px;
        }
    </style>
    """,
    unsafe_allow_html=True,
)


# -------------------------
# Startup validation
# -------------------------

try:
    settings.validate()
except ValueError as err:
    st.error(f"Configuration error:\n\n{err}")
    st.stop()


# -------------------------
# Application bootstrap
# -------------------------

def bootstrap():
    """
    Initialize session state and controller instances.
    """
    initialize_session()

    if "controller" not in st.session_state:
        st.session_state.controller = QuestionController()


def main():
    bootstrap()
    controller: QuestionController = st.session_state.controller

    constraints = controller.constraints().to_dict() if controller.is_loaded else None
    render_sidebar(constraints)

    st.title("Personal Health Knowledge Graph")
    st.caption("Consistency, progress, guideline compliance and food recommendations")

    # -------------------------
    # Graph loading
    # -------------------------

    with st.expander("Load graph", expanded=not st.session_state.graph_ready):
        uploaded = graph_uploader()

        if uploaded and st.button("Load", type="primary"):
            try:
                count = controller.load_turtle(uploaded.getvalue().decode("utf-8"))
                st.session_state.graph_ready = True
                st.session_state.graph_name = uploaded.name
                show_status(f"Loaded {count} triples from {uploaded.name}", level="success")
                st.rerun()
            except (PHKGError, UnicodeDecodeError) as exc:
                show_status(str(exc), level="error")

    if not controller.is_loaded:
        show_status("Load a PHKG to ask questions.")
        return

    # -------------------------
    # Questions
    # -------------------------

    question_id = st.selectbox("Question", controller.question_ids())
    params = question_params(question_id)
    st.caption(controller.augmented(question_id, params))

    st.divider()
    render_answers()

    if st.button("Ask", type="primary"):
        question = controller.question_text(question_id, params)
        try:
            answer = controller.ask(question_id, params)
        except PHKGError as exc:
            show_status(str(exc), level="error")
            return
        append_answer(question, answer)
        st.rerun()


if __name__ == "__main__":
    main()
