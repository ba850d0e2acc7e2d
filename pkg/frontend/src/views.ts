/** DOM rendering for the three surfaces: patient picker, resource detail,
 * and the streaming chat. All text shown in the transcript originates in
 * server events; this layer only arranges it. */

import { ApiError, FhirlitApi } from "./api.js";
import { ChatItem } from "./events.js";
import { groupByKind, kindCountsLabel, patientLabel, wordBadge } from "./format.js";
import { SessionStore, SessionView } from "./state.js";
import { t } from "./strings.js";
import type { CatalogRow, Locale, PatientHandle } from "./types.js";
import { LOCALES } from "./types.js";

type Route =
  | { page: "picker" }
  | { page: "resources"; patient: PatientHandle }
  | { page: "detail"; patient: PatientHandle; row: CatalogRow }
  | { page: "chat"; patient: PatientHandle };

export class App {
  private route: Route = { page: "picker" };
  locale: Locale = "en";

  constructor(
    private root: HTMLElement,
    private api: FhirlitApi,
    private store: SessionStore,
  ) {
    this.store.subscribe(() => {
      if (this.route.page === "chat") {
        this.renderChat();
      }
    });
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className?: string,
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = document.createElement(tag);
    if (className) {
      node.className = className;
    }
    if (text !== undefined) {
      node.textContent = text;
    }
    return node;
  }

  private navigate(route: Route): void {
    this.route = route;
    this.render();
  }

  render(): void {
    switch (this.route.page) {
      case "picker":
        void this.renderPicker();
        break;
      case "resources":
        void this.renderResources(this.route.patient);
        break;
      case "detail":
        void this.renderDetail(this.route.patient, this.route.row);
        break;
      case "chat":
        this.renderChat();
        break;
    }
  }

  private header(title: string): HTMLElement {
    const header = this.el("header");
    header.appendChild(this.el("h1", "title", title));
    const picker = this.el("select", "locale-picker");
    for (const locale of LOCALES) {
      const option = this.el("option", undefined, locale);
      option.setAttribute("value", locale);
      if (locale === this.locale) {
        option.setAttribute("selected", "selected");
      }
      picker.appendChild(option);
    }
    picker.addEventListener("change", () => {
      this.locale = picker.value as Locale;
      this.render();
    });
    const label = this.el("label", "locale-label", t(this.locale, "language") + " ");
    label.appendChild(picker);
    header.appendChild(label);
    return header;
  }

  private banner(message: string): HTMLElement {
    return this.el("div", "error-banner", `${t(this.locale, "errorBanner")}: ${message}`);
  }

  // -- patient picker -------------------------------------------------------

  async renderPicker(errorMessage?: string): Promise<void> {
    this.root.replaceChildren(this.header(t(this.locale, "appTitle")));
    if (errorMessage) {
      this.root.appendChild(this.banner(errorMessage));
    }

    const uploadSection = this.el("section", "upload");
    uploadSection.appendChild(this.el("h2", undefined, t(this.locale, "uploadBundle")));
    uploadSection.appendChild(this.el("p", "hint", t(this.locale, "uploadHint")));
    const input = this.el("input");
    input.setAttribute("type", "file");
    input.setAttribute("accept", ".json,application/json");
    input.addEventListener("change", async () => {
      const file = input.files?.[0];
      if (!file) {
        return;
      }
      try {
        const handle = await this.api.uploadBundle(await file.text());
        this.navigate({ page: "resources", patient: handle });
      } catch (error) {
        const message = error instanceof ApiError ? error.message : String(error);
        void this.renderPicker(message);
      }
    });
    uploadSection.appendChild(input);
    this.root.appendChild(uploadSection);

    const listSection = this.el("section", "previous");
    listSection.appendChild(this.el("h2", undefined, t(this.locale, "previousPatients")));
    try {
      const patients = await this.api.listPatients();
      const list = this.el("ul", "patient-list");
      for (const patient of patients) {
        const item = this.el("li");
        const button = this.el("button", "patient", patientLabel(patient.demographics));
        button.addEventListener("click", () =>
          this.navigate({ page: "resources", patient }),
        );
        item.appendChild(button);
        list.appendChild(item);
      }
      listSection.appendChild(list);
    } catch (error) {
      listSection.appendChild(this.banner(error instanceof Error ? error.message : String(error)));
    }
    this.root.appendChild(listSection);
  }

  // -- resource list --------------------------------------------------------

  async renderResources(patient: PatientHandle): Promise<void> {
    this.root.replaceChildren(this.header(t(this.locale, "resourceList")));
    const back = this.el("button", "back", t(this.locale, "backToPatients"));
    back.addEventListener("click", () => this.navigate({ page: "picker" }));
    this.root.appendChild(back);

    const counts = this.el("p", "kind-counts", kindCountsLabel(patient.kind_counts));
    this.root.appendChild(counts);

    let rows: CatalogRow[];
    try {
      rows = await this.api.listResources(patient.patient_id);
    } catch (error) {
      if (error instanceof ApiError && error.status === 404) {
        // Patient evaporated server-side: back to the picker.
        void this.renderPicker(error.message);
        this.route = { page: "picker" };
        return;
      }
      this.root.appendChild(this.banner(error instanceof Error ? error.message : String(error)));
      return;
    }

    if (rows.length === 0) {
      this.root.appendChild(this.el("p", "empty-state", t(this.locale, "emptyCatalog")));
    }
    for (const group of groupByKind(rows)) {
      const section = this.el("section", "kind-group");
      section.appendChild(this.el("h3", undefined, `${group.kind} (${group.rows.length})`));
      const list = this.el("ul");
      for (const row of group.rows) {
        const item = this.el("li");
        const button = this.el("button", "resource-row", row.rendered);
        button.addEventListener("click", () =>
          this.navigate({ page: "detail", patient, row }),
        );
        item.appendChild(button);
        list.appendChild(item);
      }
      section.appendChild(list);
      this.root.appendChild(section);
    }

    const chatButton = this.el("button", "open-chat", t(this.locale, "openChat"));
    chatButton.addEventListener("click", async () => {
      await this.store.openSession(patient, this.locale);
      this.navigate({ page: "chat", patient });
    });
    this.root.appendChild(chatButton);
  }

  // -- single-resource detail ----------------------------------------------

  async renderDetail(patient: PatientHandle, row: CatalogRow): Promise<void> {
    this.root.replaceChildren(this.header(row.display_name));
    const back = this.el("button", "back", t(this.locale, "resourceList"));
    back.addEventListener("click", () => this.navigate({ page: "resources", patient }));
    this.root.appendChild(back);
    this.root.appendChild(this.el("p", "identifier", row.rendered));

    const summarySection = this.el("section", "summary");
    summarySection.appendChild(this.el("h2", undefined, t(this.locale, "summaryHeading")));
    const summaryBody = this.el("p", undefined, t(this.locale, "loading"));
    summarySection.appendChild(summaryBody);
    this.root.appendChild(summarySection);

    const interpretationSection = this.el("section", "interpretation");
    interpretationSection.appendChild(
      this.el("h2", undefined, t(this.locale, "interpretationHeading")),
    );
    const interpretationBody = this.el("p", undefined, t(this.locale, "loading"));
    interpretationSection.appendChild(interpretationBody);
    this.root.appendChild(interpretationSection);

    try {
      const summary = await this.api.fetchSummary(patient.patient_id, row.resource_id, this.locale);
      summaryBody.textContent = summary.summary_text;
      const badge = this.el(
        "span",
        "word-badge",
        wordBadge(summary.word_count, t(this.locale, "wordBadge")),
      );
      summarySection.appendChild(badge);
      const interpretation = await this.api.fetchInterpretation(
        patient.patient_id,
        row.resource_id,
        this.locale,
      );
      interpretationBody.textContent = interpretation.interpretation_text;
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      summaryBody.textContent = "";
      this.root.appendChild(this.banner(message));
      const retry = this.el("button", "retry", t(this.locale, "retry"));
      retry.addEventListener("click", () => this.navigate({ page: "detail", patient, row }));
      this.root.appendChild(retry);
    }
  }

  // -- chat -----------------------------------------------------------------

  renderChat(): void {
    const view = this.store.view;
    this.root.replaceChildren(this.header(t(this.locale, "openChat")));
    if (view.chat.errorBanner) {
      this.root.appendChild(this.banner(view.chat.errorBanner));
    }

    const transcript = this.el("div", "transcript");
    for (const item of view.chat.items) {
      transcript.appendChild(this.chatItemNode(item));
    }
    this.root.appendChild(transcript);

    const composer = this.el("form", "composer");
    const input = this.el("input", "composer-input");
    input.setAttribute("type", "text");
    input.setAttribute("placeholder", t(this.locale, "chatPlaceholder"));
    const send = this.el("button", "send", t(this.locale, "send"));
    send.setAttribute("type", "submit");
    if (view.chat.streaming) {
      send.setAttribute("disabled", "disabled");
      input.setAttribute("disabled", "disabled");
    }
    composer.appendChild(input);
    composer.appendChild(send);
    composer.addEventListener("submit", (submitEvent) => {
      submitEvent.preventDefault();
      const text = input.value.trim();
      if (!text || view.chat.streaming) {
        return;
      }
      input.value = "";
      void this.store.send(text);
    });
    this.root.appendChild(composer);

    const clearButton = this.el("button", "clear-context", t(this.locale, "clearContext"));
    if (view.chat.streaming) {
      clearButton.setAttribute("disabled", "disabled");
    }
    clearButton.addEventListener("click", () => void this.store.clearContext());
    this.root.appendChild(clearButton);
  }

  private chatItemNode(item: ChatItem): HTMLElement {
    if (item.kind === "tool") {
      const chip = this.el("div", item.pending ? "tool-chip pending" : "tool-chip", item.label);
      return chip;
    }
    const bubble = this.el(
      "div",
      item.kind === "user" ? "bubble user" : "bubble assistant",
      item.text,
    );
    if (item.kind === "assistant" && item.streaming) {
      bubble.classList.add("streaming");
    }
    return bubble;
  }
}
