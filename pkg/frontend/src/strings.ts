/** Static UI chrome strings for the five supported languages.
 *
 * Only the chrome is translated client-side; assistant answers arrive
 * already localized because the server session carries the locale.
 */

import type { Locale } from "./types.js";

export type StringKey =
  | "appTitle"
  | "uploadBundle"
  | "uploadHint"
  | "previousPatients"
  | "resourceList"
  | "emptyCatalog"
  | "openChat"
  | "summaryHeading"
  | "interpretationHeading"
  | "wordBadge"
  | "retry"
  | "loading"
  | "chatPlaceholder"
  | "send"
  | "clearContext"
  | "language"
  | "errorBanner"
  | "backToPatients";

type StringTable = Record<StringKey, string>;

export const STRINGS: Record<Locale, StringTable> = {
  en: {
    appTitle: "Your Health Records Chat",
    uploadBundle: "Upload a FHIR bundle",
    uploadHint: "Choose a patient bundle (.json) to explore",
    previousPatients: "Previously uploaded patients",
    resourceList: "Health records",
    emptyCatalog: "No records in this bundle yet.",
    openChat: "Chat about all records",
    summaryHeading: "Summary",
    interpretationHeading: "Interpretation",
    wordBadge: "words",
    retry: "Retry",
    loading: "Loading...",
    chatPlaceholder: "Ask about your health records...",
    send: "Send",
    clearContext: "Clear conversation",
    language: "Language",
    errorBanner: "Something went wrong",
    backToPatients: "Back to patients",
  },
  es: {
    appTitle: "Chat de sus registros de salud",
    uploadBundle: "Subir un paquete FHIR",
    uploadHint: "Elija un archivo de paciente (.json) para explorar",
    previousPatients: "Pacientes subidos anteriormente",
    resourceList: "Registros de salud",
    emptyCatalog: "Todavía no hay registros en este paquete.",
    openChat: "Chatear sobre todos los registros",
    summaryHeading: "Resumen",
    interpretationHeading: "Interpretación",
    wordBadge: "palabras",
    retry: "Reintentar",
    loading: "Cargando...",
    chatPlaceholder: "Pregunte sobre sus registros de salud...",
    send: "Enviar",
    clearContext: "Borrar conversación",
    language: "Idioma",
    errorBanner: "Algo salió mal",
    backToPatients: "Volver a pacientes",
  },
  zh: {
    appTitle: "健康档案聊天",
    uploadBundle: "上传 FHIR 数据包",
    uploadHint: "选择要浏览的患者文件 (.json)",
    previousPatients: "此前上传的患者",
    resourceList: "健康记录",
    emptyCatalog: "此数据包中还没有记录。",
    openChat: "与全部记录对话",
    summaryHeading: "摘要",
    interpretationHeading: "解读",
    wordBadge: "词",
    retry: "重试",
    loading: "加载中...",
    chatPlaceholder: "询问您的健康记录...",
    send: "发送",
    clearContext: "清除对话",
    language: "语言",
    errorBanner: "出现问题",
    backToPatients: "返回患者列表",
  },
  de: {
    appTitle: "Chat über Ihre Gesundheitsakten",
    uploadBundle: "FHIR-Bundle hochladen",
    uploadHint: "Patientendatei (.json) zum Erkunden auswählen",
    previousPatients: "Zuvor hochgeladene Patienten",
    resourceList: "Gesundheitsakten",
    emptyCatalog: "Dieses Bundle enthält noch keine Einträge.",
    openChat: "Über alle Einträge chatten",
    summaryHeading: "Zusammenfassung",
    interpretationHeading: "Erläuterung",
    wordBadge: "Wörter",
    retry: "Erneut versuchen",
    loading: "Lädt...",
    chatPlaceholder: "Fragen Sie zu Ihren Gesundheitsakten...",
    send: "Senden",
    clearContext: "Verlauf löschen",
    language: "Sprache",
    errorBanner: "Etwas ist schiefgelaufen",
    backToPatients: "Zurück zu den Patienten",
  },
  fr: {
    appTitle: "Discussion sur vos dossiers de santé",
    uploadBundle: "Téléverser un bundle FHIR",
    uploadHint: "Choisissez un fichier patient (.json) à explorer",
    previousPatients: "Patients déjà téléversés",
    resourceList: "Dossiers de santé",
    emptyCatalog: "Aucun enregistrement dans ce bundle pour le moment.",
    openChat: "Discuter de tous les dossiers",
    summaryHeading: "Résumé",
    interpretationHeading: "Interprétation",
    wordBadge: "mots",
    retry: "Réessayer",
    loading: "Chargement...",
    chatPlaceholder: "Posez une question sur vos dossiers de santé...",
    send: "Envoyer",
    clearContext: "Effacer la conversation",
    language: "Langue",
    errorBanner: "Un problème est survenu",
    backToPatients: "Retour aux patients",
  },
};

export function t(locale: Locale, key: StringKey): string {
  return STRINGS[locale][key];
}
